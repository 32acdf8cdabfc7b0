#include "ydl/dynamics.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <string>

namespace ydl {

namespace {

bool grow_rule(Statistics s, int left, int here) {
  return s == Statistics::U ? left > here : static_cast<long long>(left) > static_cast<long long>(here) + 1;
}

bool shrink_rule(Statistics s, int here, int right) {
  if (s == Statistics::U) return here > right;
  return here > right + 1 || here == 1;
}

}  // namespace

std::vector<TransitionEvent> enumerate_transitions(const YoungDiagram& state, Statistics s, double epsilon) {
  state.validate(s);
  std::vector<TransitionEvent> events;
  const int K = state.length();
  for (int i = 1; i <= K + 1; ++i) {
    int left = i == 1 ? INT_MAX : state.column(i - 1);
    int here = state.column(i);
    if (grow_rule(s, left, here)) events.push_back({i, Move::grow, epsilon});
    if (here > 0 && shrink_rule(s, here, state.column(i + 1))) events.push_back({i, Move::shrink, 1.0});
  }
  return events;
}

void IndexSet::insert(int i) {
  if (i >= static_cast<int>(pos_.size())) pos_.resize(static_cast<std::size_t>(i) * 2 + 4, -1);
  if (pos_[i] >= 0) return;
  pos_[i] = static_cast<int>(items_.size());
  items_.push_back(i);
}

void IndexSet::erase(int i) {
  if (!contains(i)) return;
  int k = pos_[i];
  int moved = items_.back();
  items_[k] = moved;
  pos_[moved] = k;
  items_.pop_back();
  pos_[i] = -1;
}

DiagramProcess::DiagramProcess(const YoungDiagram& state, Statistics s, double epsilon) : stats_(s), epsilon_(epsilon) {
  state.validate(s);
  if (!(epsilon > 0.0)) throw DomainError("grow rate must be positive");
  length_ = state.length();
  h_.assign(static_cast<std::size_t>(length_) + 3, 0);
  h_[0] = INT_MAX;
  for (int i = 1; i <= length_; ++i) h_[i] = state.columns[i - 1];
  area_ = state.area();
  for (int i = 1; i <= length_ + 1; ++i) refresh(i);
}

void DiagramProcess::ensure(int i) {
  if (i + 1 >= static_cast<int>(h_.size())) h_.resize(static_cast<std::size_t>(i) * 2 + 4, 0);
}

bool DiagramProcess::grow_allowed(int i) const { return grow_rule(stats_, h_[i - 1], h_[i]); }

bool DiagramProcess::shrink_allowed(int i) const { return h_[i] > 0 && shrink_rule(stats_, h_[i], h_[i + 1]); }

void DiagramProcess::refresh(int i) {
  if (i < 1) return;
  ensure(i + 1);
  if (grow_allowed(i))
    grow_.insert(i);
  else
    grow_.erase(i);
  if (shrink_allowed(i))
    shrink_.insert(i);
  else
    shrink_.erase(i);
}

TransitionEvent DiagramProcess::select(double r) const {
  const double g = epsilon_ * static_cast<double>(grow_.size());
  if (r < g) {
    auto k = static_cast<std::size_t>(r / epsilon_);
    k = std::min(k, grow_.size() - 1);
    return {grow_.at(k), Move::grow, epsilon_};
  }
  auto k = static_cast<std::size_t>(r - g);
  k = std::min(k, shrink_.size() - 1);
  return {shrink_.at(k), Move::shrink, 1.0};
}

void DiagramProcess::apply(const TransitionEvent& e) {
  const int i = e.column;
  ensure(i + 1);
  if (e.direction == Move::grow) {
    ++h_[i];
    ++area_;
    if (i == length_ + 1) ++length_;
  } else {
    --h_[i];
    --area_;
    if (h_[i] == 0) length_ = i - 1;
  }
  refresh(i - 1);
  refresh(i);
  refresh(i + 1);
}

TransitionEvent DiagramProcess::step(Rng& rng) {
  TransitionEvent e = select(uniform01(rng) * total_rate());
  apply(e);
  return e;
}

YoungDiagram DiagramProcess::state() const {
  YoungDiagram p;
  p.columns.assign(h_.begin() + 1, h_.begin() + 1 + length_);
  return p;
}

std::uint64_t simulate_observed(const YoungDiagram& state0, Statistics s, double epsilon, int N,
                                const std::vector<double>& observer_times, Rng& rng, const TrajectoryObserver& observer) {
  if (N < 1) throw ConfigError("N must be >= 1");
  for (std::size_t k = 0; k < observer_times.size(); ++k) {
    if (!(observer_times[k] >= 0.0)) throw ConfigError("observer times must be >= 0");
    if (k > 0 && !(observer_times[k] > observer_times[k - 1]))
      throw ConfigError("observer times must be strictly increasing");
  }
  DiagramProcess proc(state0, s, epsilon);
  const double clock = static_cast<double>(N) * N;
  double t = 0.0;
  std::size_t k = 0;
  std::uint64_t jumps = 0;
  while (k < observer_times.size()) {
    double wait = -std::log1p(-uniform01(rng)) / (clock * proc.total_rate());
    double t_next = t + wait;
    while (k < observer_times.size() && observer_times[k] < t_next) {
      observer(k, observer_times[k], proc);
      ++k;
    }
    if (k == observer_times.size()) break;
    proc.step(rng);
    t = t_next;
    ++jumps;
  }
  return jumps;
}

TrajectoryRecord simulate(const YoungDiagram& state0, Statistics s, double epsilon, int N, double t_end,
                          std::vector<double> observer_times, std::uint64_t seed) {
  if (!(t_end >= 0.0)) throw ConfigError("t_end must be >= 0");
  if (observer_times.empty()) observer_times.push_back(t_end);
  for (double t : observer_times)
    if (t > t_end) throw ConfigError("observer time beyond t_end");
  TrajectoryRecord rec;
  rec.seed = seed;
  Rng rng(seed);
  rec.jump_count = simulate_observed(state0, s, epsilon, N, observer_times, rng,
                                     [&](std::size_t, double t, const DiagramProcess& p) {
                                       rec.times.push_back(t);
                                       rec.snapshots.push_back(p.state());
                                     });
  return rec;
}

int OccupancyWindow::at(long x) const {
  if (x >= first() && x <= last()) return values[static_cast<std::size_t>(x - origin)];
  if (kind == OccupancyKind::wasep_etabar && x < first()) return 1;
  return 0;
}

OccupancyWindow to_occupancy(const YoungDiagram& state, Statistics s) {
  state.validate(s);
  OccupancyWindow w;
  w.origin = 1;
  w.kind = s == Statistics::U ? OccupancyKind::zero_range_xi : OccupancyKind::exclusion_eta;
  w.values.assign(static_cast<std::size_t>(std::max(1, state.column(1))), 0);
  for (int c : state.columns) ++w.values[static_cast<std::size_t>(c - 1)];
  return w;
}

int minimal_wasep_radius(const YoungDiagram& p) { return std::max(p.column(1), p.length() + 1); }

OccupancyWindow rotate_to_wasep(const YoungDiagram& p, int window_radius) {
  p.validate(Statistics::U);
  if (window_radius < minimal_wasep_radius(p))
    throw TruncationError("rotation window radius " + std::to_string(window_radius) + " below required " +
                          std::to_string(minimal_wasep_radius(p)));
  OccupancyWindow w;
  w.kind = OccupancyKind::wasep_etabar;
  w.origin = -window_radius;
  w.values.assign(2 * static_cast<std::size_t>(window_radius) + 1, 0);
  const int K = p.length();
  for (int i = 1; i <= K; ++i) w.values[static_cast<std::size_t>(p.columns[i - 1] - i + window_radius)] = 1;
  for (int i = K + 1; i <= window_radius; ++i) w.values[static_cast<std::size_t>(window_radius - i)] = 1;
  return w;
}

}  // namespace ydl
