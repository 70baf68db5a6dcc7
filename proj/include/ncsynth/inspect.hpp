/// @file  inspect.hpp
/// @brief Reading BDD files back as explicit data
///
/// Everything here works from the metadata stored with a BDD: each variable
/// block decodes to one grid index per dimension, or -1 for the dummy symbol.

#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ncsynth/bdd_io.hpp"
#include "ncsynth/dd.hpp"

namespace ncsynth {

/// Decoded rows; one column per dimension of every selected block.
struct RowTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::int64_t>> rows; // sorted, no duplicates
  friend bool operator==(const RowTable &, const RowTable &) = default;
};

/// Blocks the rows of a file range over: pre and input for controllers, pre
/// for state sets, all roles for transition relations.
std::vector<std::string> default_roles(const dd::MetaBlock &meta);

/// Throws UsageError when the set has more than `max_rows` rows.
RowTable to_rows(dd::DdManager &mgr, const dd::Bdd &f, const dd::MetaBlock &meta,
                 const std::vector<std::string> &roles, std::size_t max_rows = SIZE_MAX);
dd::Bdd from_rows(dd::DdManager &mgr, const RowTable &t, const dd::MetaBlock &meta,
                  const std::vector<std::string> &roles);

void write_csv(const RowTable &t, std::ostream &out);
RowTable read_csv(std::istream &in);

/// Labelled transition system in the mCRL2 FSM text format. States are the
/// pre-state values that occur; initial states come first.
void write_fsm(dd::DdManager &mgr, const dd::Bdd &trans, const dd::Bdd &initial,
               const dd::MetaBlock &meta, std::ostream &out);

/// Metadata, node count and model sizes in readable form.
std::string dump(dd::DdManager &mgr, const dd::Bdd &f, const dd::MetaBlock &meta);

/// ASCII picture of a set projected onto two dimensions of one block
/// ('#' member, '.' not). The top row is the largest index of the second
/// dimension; 1-dimensional blocks give a single row.
std::string coverage(dd::DdManager &mgr, const dd::Bdd &set, const dd::MetaBlock &meta,
                     const std::string &block = "",
                     std::pair<std::size_t, std::size_t> dims = {0, 1});

/// Line-oriented explorer over a transition relation.
///   inputs <state>                   inputs with at least one successor,
///                                    or "no input"
///   post <state> : <in> ; <in> ...   successor set after each input
///   help | quit
/// States and inputs are `name=i[,j..]` tokens per block (q for the dummy
/// symbol); omitted blocks are left free. With a single block, bare indices
/// work too.
class Explorer {
public:
  Explorer(dd::DdManager &mgr, dd::Bdd trans, dd::MetaBlock meta);

  /// Answers one command; sets done() after quit.
  std::string command(const std::string &line);
  [[nodiscard]] bool done() const noexcept { return done_; }
  /// Reads commands until quit or end of input.
  void repl(std::istream &in, std::ostream &out);

  std::size_t max_rows = 50;

private:
  dd::Bdd parse(const std::string &text, const std::string &role) const;

  dd::DdManager &mgr_;
  dd::Bdd trans_;
  dd::MetaBlock meta_;
  bool done_ = false;
};

} // namespace ncsynth
