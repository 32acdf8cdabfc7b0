#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ydl/core.hpp"
#include "ydl/ensembles.hpp"

namespace ydl {

enum class Move : int { grow = 1, shrink = -1 };

struct TransitionEvent {
  int column;
  Move direction;
  double rate;  // before the N^2 acceleration
  bool operator==(const TransitionEvent&) const = default;
};

std::vector<TransitionEvent> enumerate_transitions(const YoungDiagram& state, Statistics s, double epsilon);

// Set of column indices with O(1) insert, erase and uniform pick.
class IndexSet {
 public:
  void insert(int i);
  void erase(int i);
  bool contains(int i) const { return i < static_cast<int>(pos_.size()) && pos_[i] >= 0; }
  std::size_t size() const { return items_.size(); }
  int at(std::size_t k) const { return items_[k]; }

 private:
  std::vector<int> items_;
  std::vector<int> pos_;
};

// Jump chain of the column dynamics with incremental bookkeeping of allowed moves.
class DiagramProcess {
 public:
  DiagramProcess(const YoungDiagram& state, Statistics s, double epsilon);

  double total_rate() const { return epsilon_ * static_cast<double>(grow_.size()) + static_cast<double>(shrink_.size()); }
  // r uniform on [0, total_rate()) selects the event
  TransitionEvent select(double r) const;
  void apply(const TransitionEvent& e);
  // one jump with its selection drawn from rng
  TransitionEvent step(Rng& rng);

  int column(int i) const { return i < static_cast<int>(h_.size()) ? h_[i] : 0; }
  int length() const { return length_; }
  long long area() const { return area_; }
  YoungDiagram state() const;
  Statistics statistics() const { return stats_; }
  double epsilon() const { return epsilon_; }

 private:
  bool grow_allowed(int i) const;
  bool shrink_allowed(int i) const;
  void refresh(int i);
  void ensure(int i);

  Statistics stats_;
  double epsilon_;
  std::vector<int> h_;  // h_[0] stands for the infinite column
  int length_ = 0;
  long long area_ = 0;
  IndexSet grow_;
  IndexSet shrink_;
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<YoungDiagram> snapshots;
  std::uint64_t seed = 0;
  std::uint64_t jump_count = 0;
};

// Observer sees the process at each requested macroscopic time.
using TrajectoryObserver = std::function<void(std::size_t index, double t, const DiagramProcess&)>;

// Exact simulation of the N^2-accelerated dynamics up to the last observer time.
// Returns the number of jumps performed.
std::uint64_t simulate_observed(const YoungDiagram& state0, Statistics s, double epsilon, int N,
                                const std::vector<double>& observer_times, Rng& rng, const TrajectoryObserver& observer);

TrajectoryRecord simulate(const YoungDiagram& state0, Statistics s, double epsilon, int N, double t_end,
                          std::vector<double> observer_times, std::uint64_t seed);

enum class OccupancyKind { zero_range_xi, exclusion_eta, wasep_etabar };

struct OccupancyWindow {
  long origin = 1;
  std::vector<int> values;
  OccupancyKind kind = OccupancyKind::exclusion_eta;

  long first() const { return origin; }
  long last() const { return origin + static_cast<long>(values.size()) - 1; }
  // value at site x; outside the window the far-field convention applies
  int at(long x) const;
};

OccupancyWindow to_occupancy(const YoungDiagram& state, Statistics s);

// smallest radius for which the rotated window shows both far-field regimes
int minimal_wasep_radius(const YoungDiagram& p);
// occupied sites are exactly p_i - i, i >= 1
OccupancyWindow rotate_to_wasep(const YoungDiagram& p, int window_radius);

}  // namespace ydl
