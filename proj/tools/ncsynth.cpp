#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ncsynth/bdd_io.hpp"
#include "ncsynth/errors.hpp"
#include "ncsynth/inspect.hpp"
#include "ncsynth/pipeline.hpp"

using namespace ncsynth;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kEmpty = 3, kDomain = 4 };

struct StageArgs {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  bool unsafe = false;
};

void print(const StageReport &r) {
  std::cout << r.stage << ": " << r.seconds << " s";
  for (const auto &[k, v] : r.sizes.items())
    std::cout << "  " << k << "=" << (v.is_string() ? v.get<std::string>() : v.dump());
  std::cout << "\n";
  for (const auto &o : r.outputs)
    std::cout << "  wrote " << o.string() << "\n";
}

Pipeline make_pipeline(const StageArgs &a) {
  auto cfg = load_config(a.config);
  if (cfg.sim) {
    if (a.seed)
      cfg.sim->seed = *a.seed;
    cfg.sim->unsafe = cfg.sim->unsafe || a.unsafe;
  }
  return Pipeline(std::move(cfg), a.out);
}

std::vector<std::string> roles_or_default(const std::string &text, const dd::MetaBlock &meta) {
  if (text.empty())
    return default_roles(meta);
  std::vector<std::string> out;
  std::stringstream s(text);
  for (std::string r; std::getline(s, r, ',');)
    out.push_back(r);
  return out;
}

std::ostream &output(const std::string &path, std::ofstream &file) {
  if (path.empty() || path == "-")
    return std::cout;
  file.open(path);
  if (!file)
    throw UsageError("cannot write " + path);
  return file;
}

// "x.bdd" -> "x.init.bdd" when it exists
std::optional<fs::path> sibling_init(const fs::path &p) {
  auto q = p;
  q.replace_extension(".init.bdd");
  if (fs::exists(q) && q != p)
    return q;
  return std::nullopt;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"ncsynth: symbolic controllers for networked control loops"};
  app.require_subcommand(1);

  StageArgs sa;
  std::vector<std::pair<std::string, CLI::App *>> stages;
  for (const char *name : {"abstract", "expand", "synth", "sim", "codegen", "run"}) {
    auto *c = app.add_subcommand(name, std::string(name) == "run" ? "run every configured stage"
                                                                   : std::string("run the ") + name + " stage");
    c->add_option("--config", sa.config, "JSON config")->required()->check(CLI::ExistingFile);
    c->add_option("--out", sa.out, "output directory")->capture_default_str();
    c->add_option("--seed", sa.seed, "simulation seed, overrides the config");
    c->add_flag("--unsafe", sa.unsafe, "simulate random delays with a controller built for prolonged ones");
    stages.emplace_back(name, c);
  }

  std::string file, init, block, dims, roles, like, out;
  auto *fsm = app.add_subcommand("fsm", "export a transition relation as an FSM file");
  fsm->add_option("file", file, "BDD file")->required()->check(CLI::ExistingFile);
  fsm->add_option("--init", init, "initial-state BDD (default: <file>.init.bdd if present)");
  fsm->add_option("-o,--output", out, "output path (default stdout)");

  auto *dump_cmd = app.add_subcommand("dump", "print metadata and sizes of a BDD file");
  dump_cmd->add_option("file", file, "BDD file")->required()->check(CLI::ExistingFile);

  auto *cov = app.add_subcommand("coverage", "ASCII picture of a set over two grid dimensions");
  cov->add_option("file", file, "BDD file")->required()->check(CLI::ExistingFile);
  cov->add_option("--block", block, "block to draw (default pre or x1)");
  cov->add_option("--dims", dims, "dimension pair, e.g. 0,1");

  auto *explore = app.add_subcommand("explore", "interactive queries on a relation (reads stdin)");
  explore->add_option("file", file, "BDD file")->required()->check(CLI::ExistingFile);

  auto *to_csv = app.add_subcommand("export-csv", "decode a BDD file into CSV rows");
  to_csv->add_option("file", file, "BDD file")->required()->check(CLI::ExistingFile);
  to_csv->add_option("--roles", roles, "comma separated roles (default by file kind)");
  to_csv->add_option("-o,--output", out, "output path (default stdout)");

  auto *from_csv = app.add_subcommand("import-csv", "encode CSV rows over the variables of a BDD file");
  from_csv->add_option("file", file, "CSV file")->required()->check(CLI::ExistingFile);
  from_csv->add_option("--like", like, "BDD file whose metadata to use")->required()->check(CLI::ExistingFile);
  from_csv->add_option("--roles", roles, "comma separated roles (default by file kind)");
  from_csv->add_option("-o,--output", out, "output BDD path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    for (const auto &[name, cmd] : stages) {
      if (!cmd->parsed())
        continue;
      auto p = make_pipeline(sa);
      if (name == "abstract")
        print(p.abstract());
      else if (name == "expand")
        print(p.expand());
      else if (name == "synth")
        print(p.synth());
      else if (name == "sim")
        print(p.simulate());
      else if (name == "codegen")
        print(p.codegen());
      else
        for (const auto &r : p.run_all())
          print(r);
      return kOk;
    }

    dd::DdManager mgr;
    if (fsm->parsed()) {
      auto [trans, meta] = dd::load(mgr, file);
      auto init_path = init.empty() ? sibling_init(file) : std::optional<fs::path>(init);
      dd::Bdd initial = mgr.bdd_false();
      if (init_path)
        initial = dd::load(mgr, *init_path).first;
      std::ofstream f;
      write_fsm(mgr, trans, initial, meta, output(out, f));
    } else if (dump_cmd->parsed()) {
      auto [f, meta] = dd::load(mgr, file);
      std::cout << dump(mgr, f, meta);
    } else if (cov->parsed()) {
      auto [f, meta] = dd::load(mgr, file);
      std::pair<std::size_t, std::size_t> d{0, 1};
      if (!dims.empty()) {
        auto comma = dims.find(',');
        if (comma == std::string::npos)
          throw UsageError("--dims takes two indices, e.g. 0,1");
        d = {std::stoul(dims.substr(0, comma)), std::stoul(dims.substr(comma + 1))};
      }
      std::cout << coverage(mgr, f, meta, block, d);
    } else if (explore->parsed()) {
      auto [f, meta] = dd::load(mgr, file);
      Explorer ex(mgr, f, meta);
      ex.repl(std::cin, std::cout);
    } else if (to_csv->parsed()) {
      auto [f, meta] = dd::load(mgr, file);
      std::ofstream o;
      write_csv(to_rows(mgr, f, meta, roles_or_default(roles, meta)), output(out, o));
    } else if (from_csv->parsed()) {
      auto meta = dd::load(mgr, like).second;
      std::ifstream in(file);
      auto f = from_rows(mgr, read_csv(in), meta, roles_or_default(roles, meta));
      dd::save(f, meta, out);
    }
    return kOk;
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const UsageError &e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kConfig;
  } catch (const EmptyController &e) {
    std::cerr << "empty controller: " << e.what() << "\n";
    return kEmpty;
  } catch (const DomainViolation &e) {
    std::cerr << "domain violation: " << e.what() << "\n";
    return kDomain;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
