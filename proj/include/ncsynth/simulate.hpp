/// @file  simulate.hpp
/// @brief Closed-loop simulation over delayed channels
///
/// Each step k runs: sample x_k, deliver on the sensor channel, compute the
/// control input, deliver on the actuator channel, actuate (zero-order hold),
/// integrate the plant over one period.
///
/// The controller only sees delayed measurements. It rebuilds the expanded
/// state by predicting the plant symbol forward through the deterministic
/// plant model from the newest delivered measurement, using the inputs it
/// sent itself. Before the first measurement arrives it sends u0.

#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ncsynth/abstraction.hpp"
#include "ncsynth/ncs.hpp"
#include "ncsynth/synthesis.hpp"

namespace ncsynth {

enum class ChannelMode {
  /// Every packet waits exactly the channel maximum.
  Prolonged,
  /// Uniform delay in [min, max]; packets may overtake each other.
  Random,
};

std::string to_string(ChannelMode m);
ChannelMode channel_mode_from_string(const std::string &s);

struct Delivery {
  std::uint64_t sent = 0, delivered = 0;
};

/// A delayed channel. deliver(k) returns the newest packet released by step
/// k; older released packets are dropped. Delays are in sampling periods; a
/// channel with max = 0 passes packets through within the same step.
template <typename T> class DelayChannel {
public:
  DelayChannel(unsigned min_delay, unsigned max_delay, ChannelMode mode, std::uint64_t seed)
      : min_(min_delay), max_(max_delay), mode_(mode), rng_(seed) {
    if (min_delay > max_delay)
      throw std::invalid_argument("DelayChannel: min delay exceeds max delay");
  }

  void send(T payload, std::uint64_t k) {
    unsigned d = max_;
    if (mode_ == ChannelMode::Random)
      d = std::uniform_int_distribution<unsigned>(min_, max_)(rng_);
    queue_.push_back({std::move(payload), k, k + d});
  }

  struct Packet {
    T payload;
    std::uint64_t sent = 0;
  };

  std::optional<Packet> deliver(std::uint64_t k) {
    std::optional<Packet> best;
    for (auto it = queue_.begin(); it != queue_.end();) {
      if (it->release <= k) {
        log_.push_back({it->sent, k});
        if (!best || it->sent > best->sent)
          best = Packet{it->payload, it->sent};
        it = queue_.erase(it);
      } else {
        ++it;
      }
    }
    // a packet older than one already handed out is stale
    if (best && last_ && best->sent < *last_)
      best.reset();
    if (best)
      last_ = best->sent;
    return best;
  }

  [[nodiscard]] const std::vector<Delivery> &deliveries() const noexcept { return log_; }
  [[nodiscard]] std::size_t in_flight() const noexcept { return queue_.size(); }

private:
  struct Entry {
    T payload;
    std::uint64_t sent, release;
  };
  unsigned min_, max_;
  ChannelMode mode_;
  std::mt19937_64 rng_;
  std::deque<Entry> queue_;
  std::vector<Delivery> log_;
  std::optional<std::uint64_t> last_;
};

struct SimConfig {
  std::size_t steps = 100;
  Vec x0;
  Vec u0; // held by the actuator until the first control packet arrives
  std::uint64_t seed = 1;
  ChannelMode channel_mode = ChannelMode::Prolonged;
  /// Allows random channels and nondeterministic plant models, which void the
  /// closed-loop guarantees.
  bool unsafe = false;
};

/// One row of a trace. Symbols are flat grid indices, -1 for none.
struct StepRecord {
  std::uint64_t k = 0;
  Vec x;                        // plant state at the start of the step
  std::int64_t delivered = -1;  // state symbol that reached the controller
  std::int64_t chosen = -1;     // input symbol picked by the controller
  Vec u;                        // input applied during the step
  int mode = 0;                 // controller mode used in the step
  friend bool operator==(const StepRecord &, const StepRecord &) = default;
};

using Trace = std::vector<StepRecord>;

class ClosedLoop {
public:
  /// Networked loop: the controller acts on the expanded model, channel
  /// delays are the model's delay bounds.
  ClosedLoop(PlantSpec plant, const TransitionSystem &base, const NcsModel &model,
             const Controller &controller, SimConfig cfg);
  /// Direct loop without delays: the controller acts on the plant model.
  ClosedLoop(PlantSpec plant, const TransitionSystem &base, const Controller &controller,
             SimConfig cfg);

  /// Runs one step. Throws DomainViolation when the controller has no input
  /// for the state it reconstructed.
  StepRecord step();
  Trace run();

  [[nodiscard]] const Vec &state() const noexcept { return x_; }
  [[nodiscard]] int mode() const noexcept { return mode_; }
  [[nodiscard]] const std::vector<Delivery> &sensor_deliveries() const { return sc_.deliveries(); }
  [[nodiscard]] const std::vector<Delivery> &actuator_deliveries() const { return ca_.deliveries(); }

private:
  struct Mode {
    dd::Bdd relation;
    dd::Bdd goal;
    int next = 0;
  };

  void init_modes(dd::DdManager &mgr, const Controller &c, std::span<const dd::Var> code_bits);
  dd::Bdd predict(const dd::Bdd &cells, Index u) const;
  dd::Bdd lift(std::int64_t t, const Register &r) const;
  dd::Bdd reconstruct(std::uint64_t k);
  Index sent_at(std::int64_t j) const;

  PlantSpec plant_;
  const TransitionSystem *base_;
  const NcsModel *model_ = nullptr;
  SimConfig cfg_;
  std::vector<Mode> modes_;
  std::vector<dd::Var> input_vars_;
  Index u0_ = 0;

  DelayChannel<std::int64_t> sc_;
  DelayChannel<Index> ca_;
  Vec x_;
  Index held_;
  int mode_ = 0;
  std::uint64_t k_ = 0;

  std::int64_t last_delivered_time_ = -1;
  // plant cells consistent with the deliveries, per step; a single cell
  // when the plant model is deterministic
  std::vector<dd::Bdd> belief_;
  std::vector<Index> sent_;          // input symbol sent per step
};

void write_trace_csv(const Trace &t, std::ostream &out);
Trace read_trace_csv(std::istream &in);
void write_trace_json(const Trace &t, std::ostream &out);
Trace read_trace_json(std::istream &in);

} // namespace ncsynth
