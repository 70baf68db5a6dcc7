/// @file  bdd_io.hpp
/// @brief Binary BDD files with a JSON metadata block
///
/// Layout (little-endian):
///   "SNSB" | u16 version | u32 meta_len | meta_len bytes UTF-8 JSON |
///   u32 var_count | u64 node_count | node_count * (u32 var, u64 lo, u64 hi) |
///   u64 root
/// Node ids 0 and 1 are FALSE and TRUE; internal nodes are numbered from 2 in
/// file order, children always before parents.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncsynth/dd.hpp"

namespace ncsynth::dd {

inline constexpr std::uint16_t kFileVersion = 1;

/// A group of BDD variables encoding one grid-valued quantity: a plant state,
/// an input, or one register of an expanded model.
struct VarBlock {
  std::string name;            // "pre", "post", "input", "x1", "u2", "nsc1", ...
  std::string role;            // "pre" | "input" | "post"
  std::string register_kind;   // "" | "state" | "input" | "nsc" | "nca"
  int register_index = 0;      // 1-based position in its register chain, 0 if none
  std::vector<double> lb, ub, eta;
  std::vector<std::vector<Var>> vars; // per dimension, least significant bit first
  std::optional<Var> q_flag;          // extra bit marking the dummy symbol, if allocated
  bool has_q = false;                 // register can hold the dummy symbol

  friend bool operator==(const VarBlock &, const VarBlock &) = default;
};

struct MetaBlock {
  double tau = 0.0;
  std::vector<VarBlock> blocks;
  /// Free-form fields: model kind, delay bounds, names, ...
  nlohmann::json extra = nlohmann::json::object();

  [[nodiscard]] const VarBlock *find(std::string_view name) const;
  /// Variables of all blocks with the given role, in block order.
  [[nodiscard]] std::vector<Var> vars_with_role(std::string_view role) const;
  [[nodiscard]] std::vector<Var> all_vars() const;

  friend bool operator==(const MetaBlock &, const MetaBlock &) = default;
};

void to_json(nlohmann::json &j, const VarBlock &b);
void from_json(const nlohmann::json &j, VarBlock &b);
void to_json(nlohmann::json &j, const MetaBlock &m);
void from_json(const nlohmann::json &j, MetaBlock &m);

/// Serialized image of a BDD, independent of any file.
std::string serialize(const Bdd &f, const MetaBlock &meta);
/// Rebuilds into `mgr`, growing its variable count if needed.
std::pair<Bdd, MetaBlock> deserialize(DdManager &mgr, const std::string &bytes);

void save(const Bdd &f, const MetaBlock &meta, const std::filesystem::path &path);
std::pair<Bdd, MetaBlock> load(DdManager &mgr, const std::filesystem::path &path);
/// Reads only the header and metadata.
MetaBlock load_meta(const std::filesystem::path &path);

} // namespace ncsynth::dd
