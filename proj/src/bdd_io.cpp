#include "ncsynth/bdd_io.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "ncsynth/errors.hpp"

namespace ncsynth::dd {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'S', 'B'};

template <typename T> void put(std::string &out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

class Reader {
public:
  explicit Reader(const std::string &bytes) : bytes_(bytes) {}

  template <typename T> T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= std::uint64_t{static_cast<unsigned char>(bytes_[pos_ + i])} << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  [[nodiscard]] bool at_end() const { return pos_ == bytes_.size(); }

private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      throw FormatError("BDD file truncated");
  }

  const std::string &bytes_;
  std::size_t pos_ = 0;
};

MetaBlock read_header(Reader &in) {
  std::string magic = in.take(4);
  if (magic != std::string(kMagic, 4))
    throw FormatError("not a BDD file (bad magic)");
  auto version = in.get<std::uint16_t>();
  if (version != kFileVersion)
    throw FormatError("unsupported BDD file version " + std::to_string(version));
  auto len = in.get<std::uint32_t>();
  std::string text = in.take(len);
  try {
    return nlohmann::json::parse(text).get<MetaBlock>();
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("corrupt metadata block: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

const VarBlock *MetaBlock::find(std::string_view name) const {
  for (const auto &b : blocks)
    if (b.name == name)
      return &b;
  return nullptr;
}

std::vector<Var> MetaBlock::vars_with_role(std::string_view role) const {
  std::vector<Var> out;
  for (const auto &b : blocks) {
    if (b.role != role)
      continue;
    for (const auto &dim : b.vars)
      out.insert(out.end(), dim.begin(), dim.end());
    if (b.q_flag)
      out.push_back(*b.q_flag);
  }
  return out;
}

std::vector<Var> MetaBlock::all_vars() const {
  std::vector<Var> out;
  for (const auto &b : blocks) {
    for (const auto &dim : b.vars)
      out.insert(out.end(), dim.begin(), dim.end());
    if (b.q_flag)
      out.push_back(*b.q_flag);
  }
  return out;
}

void to_json(nlohmann::json &j, const VarBlock &b) {
  j = nlohmann::json{{"name", b.name},   {"role", b.role}, {"register", b.register_kind},
                     {"index", b.register_index}, {"lb", b.lb}, {"ub", b.ub},
                     {"eta", b.eta},     {"vars", b.vars}, {"has_q", b.has_q}};
  std::vector<std::size_t> bits;
  for (const auto &d : b.vars)
    bits.push_back(d.size());
  j["bits"] = bits;
  if (b.q_flag)
    j["q_flag"] = *b.q_flag;
}

void from_json(const nlohmann::json &j, VarBlock &b) {
  j.at("name").get_to(b.name);
  j.at("role").get_to(b.role);
  b.register_kind = j.value("register", "");
  b.register_index = j.value("index", 0);
  j.at("lb").get_to(b.lb);
  j.at("ub").get_to(b.ub);
  j.at("eta").get_to(b.eta);
  j.at("vars").get_to(b.vars);
  b.has_q = j.value("has_q", false);
  b.q_flag.reset();
  if (j.contains("q_flag"))
    b.q_flag = j.at("q_flag").get<Var>();
}

void to_json(nlohmann::json &j, const MetaBlock &m) {
  j = nlohmann::json{{"tau", m.tau}, {"blocks", m.blocks}, {"extra", m.extra}};
}

void from_json(const nlohmann::json &j, MetaBlock &m) {
  j.at("tau").get_to(m.tau);
  j.at("blocks").get_to(m.blocks);
  m.extra = j.value("extra", nlohmann::json::object());
}

std::string serialize(const Bdd &f, const MetaBlock &meta) {
  if (!f.valid())
    throw UsageError("serialize: invalid BDD");
  DdManager &mgr = *f.manager();
  std::string out(kMagic, 4);
  put<std::uint16_t>(out, kFileVersion);
  std::string text = nlohmann::json(meta).dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  put<std::uint32_t>(out, mgr.var_count());

  std::vector<NodeId> order = mgr.topological_nodes(f);
  std::unordered_map<NodeId, std::uint64_t> file_id{{kFalse, 0}, {kTrue, 1}};
  put<std::uint64_t>(out, order.size());
  std::uint64_t next = 2;
  for (NodeId n : order) {
    put<std::uint32_t>(out, mgr.node_var(n));
    put<std::uint64_t>(out, file_id.at(mgr.node_lo(n)));
    put<std::uint64_t>(out, file_id.at(mgr.node_hi(n)));
    file_id.emplace(n, next++);
  }
  put<std::uint64_t>(out, file_id.at(f.id()));
  return out;
}

std::pair<Bdd, MetaBlock> deserialize(DdManager &mgr, const std::string &bytes) {
  Reader in(bytes);
  MetaBlock meta = read_header(in);
  auto var_count = in.get<std::uint32_t>();
  auto node_count = in.get<std::uint64_t>();
  if (node_count > bytes.size())
    throw FormatError("corrupt node count");
  mgr.ensure_vars(var_count);
  std::vector<Bdd> nodes;
  nodes.reserve(node_count + 2);
  nodes.push_back(mgr.bdd_false());
  nodes.push_back(mgr.bdd_true());
  for (std::uint64_t i = 0; i < node_count; ++i) {
    auto v = in.get<std::uint32_t>();
    auto lo = in.get<std::uint64_t>();
    auto hi = in.get<std::uint64_t>();
    if (v >= var_count || lo >= nodes.size() || hi >= nodes.size() || lo == hi)
      throw FormatError("corrupt node record " + std::to_string(i));
    try {
      nodes.push_back(mgr.make(v, nodes[lo], nodes[hi]));
    } catch (const UsageError &e) {
      throw FormatError("corrupt node record " + std::to_string(i) + ": " + e.what());
    }
  }
  auto root = in.get<std::uint64_t>();
  if (root >= nodes.size())
    throw FormatError("corrupt root index");
  if (!in.at_end())
    throw FormatError("trailing bytes after root index");
  return {nodes[root], std::move(meta)};
}

void save(const Bdd &f, const MetaBlock &meta, const std::filesystem::path &path) {
  std::string bytes = serialize(f, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw std::runtime_error("write failed: " + path.string());
}

std::pair<Bdd, MetaBlock> load(DdManager &mgr, const std::filesystem::path &path) {
  return deserialize(mgr, read_file(path));
}

MetaBlock load_meta(const std::filesystem::path &path) {
  std::string bytes = read_file(path);
  Reader in(bytes);
  return read_header(in);
}

} // namespace ncsynth::dd
