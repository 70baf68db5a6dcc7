/// @file  pipeline.hpp
/// @brief Config-driven stages: abstract, expand, synth, sim, codegen
///
/// Every stage reads the files of the stages before it from the output
/// directory, writes its own, and records inputs, output hashes, timing and
/// sizes in `manifest.json` there.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncsynth/abstraction.hpp"
#include "ncsynth/ncs.hpp"
#include "ncsynth/simulate.hpp"

namespace ncsynth {

struct Box {
  Vec lb, ub;
};

/// A plant given by its transitions instead of an ODE. States and inputs are
/// the points 0 .. n-1 of one-dimensional unit grids.
struct ExplicitPlant {
  Index states = 0, inputs = 0;
  std::vector<ExplicitTransition> transitions;
};

struct PlantConfig {
  std::string name;
  nlohmann::json params = nlohmann::json::object();
  double tau = 1.0;
  UniformGrid grid, input_grid;
  std::vector<Box> obstacles;
  std::vector<Box> initial; // empty: every cell
  std::optional<ExplicitPlant> explicit_model;
};

struct SpecConfig {
  std::string kind; // safety | reach | persistence | recurrence | gen_buchi
  std::vector<std::vector<Box>> targets;
  std::vector<Box> safe; // empty: the whole grid
  Anchor anchor = Anchor::Newest;
};

struct CodegenConfig {
  std::string name = "controller";
  std::vector<std::string> targets{"c", "verilog"};
};

struct Config {
  PlantConfig plant;
  /// Absent for a loop without network delays.
  std::optional<DelayBounds> delays;
  InputSelector selector = InputSelector::NewestArrived;
  std::optional<SpecConfig> spec;
  std::optional<SimConfig> sim;
  std::optional<CodegenConfig> codegen;
  nlohmann::json source; // the document as read
};

/// Throws ConfigError with the offending key on any schema violation.
Config parse_config(const nlohmann::json &doc);
Config load_config(const std::filesystem::path &path);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path &path);
std::string sha256_hex(const std::string &bytes);

struct StageReport {
  std::string stage;
  double seconds = 0;
  nlohmann::json sizes = nlohmann::json::object();
  std::vector<std::filesystem::path> outputs; // relative to the output directory
};

class Pipeline {
public:
  Pipeline(Config cfg, std::filesystem::path out_dir);

  StageReport abstract();
  StageReport expand();
  /// Throws EmptyController when the specification is unrealizable.
  StageReport synth();
  StageReport simulate();
  /// Refuses models with non-prolonged delays.
  StageReport codegen();
  /// Every stage the config has a section for, in order.
  std::vector<StageReport> run_all();

  [[nodiscard]] const std::filesystem::path &out_dir() const noexcept { return out_; }
  [[nodiscard]] bool networked() const noexcept { return cfg_.delays.has_value(); }

private:
  std::filesystem::path file(const std::string &name) const { return out_ / name; }
  std::filesystem::path need(const std::string &name, const std::string &stage) const;
  void record(const StageReport &r, const std::vector<std::string> &inputs);

  Config cfg_;
  std::filesystem::path out_;
};

} // namespace ncsynth
