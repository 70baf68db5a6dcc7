/// @file  codegen.hpp
/// @brief Determinized controllers as C and Verilog
///
/// A controller relation over (state bits, input bits) is first reduced to
/// one input per state, the smallest input code. Each bit of that code is
/// then a boolean function of the state bits, emitted following the BDD
/// structure: one nested conditional per node.
///
/// Packed layouts: state bit i is variable `state_bits[i]`, stored in word
/// i / 64, bit i % 64. Input code bit j is variable `input_bits[j]`.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "ncsynth/dd.hpp"
#include "ncsynth/synthesis.hpp"

namespace ncsynth {

/// Keeps, for every state, only the smallest input code. `input_bits` lists
/// the code bits least significant first.
dd::Bdd determinize(dd::DdManager &mgr, const dd::Bdd &relation, std::span<const dd::Var> input_bits);
Controller determinize(dd::DdManager &mgr, const Controller &c, std::span<const dd::Var> input_bits);

/// b_j(state) = bit j of the input chosen in `state`. Outside the domain the
/// functions are unconstrained. Throws UsageError if `det` is not deterministic.
std::vector<dd::Bdd> decompose_outputs(dd::DdManager &mgr, const dd::Bdd &det,
                                       std::span<const dd::Var> state_bits,
                                       std::span<const dd::Var> input_bits);

struct CodegenMode {
  std::vector<dd::Bdd> bits; // per input code bit
  dd::Bdd domain;
  dd::Bdd goal; // unused for single-mode controllers
  int next = 0;
};

struct CodegenInput {
  std::string name; // C identifier prefix / module name
  std::vector<dd::Var> state_bits;
  std::vector<dd::Var> input_bits;
  std::vector<CodegenMode> modes; // one entry for static controllers
  std::string description;        // copied into the comment header
};

/// Builds the codegen input for a controller: determinizes every mode.
CodegenInput prepare_codegen(dd::DdManager &mgr, const Controller &c, std::string name,
                             std::vector<dd::Var> state_bits, std::vector<dd::Var> input_bits);

struct CSource {
  std::string header;
  std::string source;
};

CSource emit_c(dd::DdManager &mgr, const CodegenInput &in);
std::string emit_verilog(dd::DdManager &mgr, const CodegenInput &in);

/// Input code of a packed state, evaluated on the BDDs (reference for tests).
std::uint64_t eval_bits(const dd::DdManager &mgr, const CodegenMode &mode,
                        std::span<const dd::Var> state_bits, std::span<const bool> state_values);

} // namespace ncsynth
