#pragma once

#include "rds/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace rds {

/// Convert a grid-aligned time to a node index; throws GridError otherwise.
long grid_nodes(double t, double dt, const char* what = "time");

/// Two-sided m-dimensional Brownian sample on a uniform grid over [-U, U].
///
/// The cumulative samples are stored once, immutably, and shared between
/// every shifted or copied view. A view is the shared storage plus an
/// integer anchor: the value at relative node k is base[a + k] - base[a],
/// so W(0) = 0 holds exactly and shifting is pure re-anchoring. Increments
/// are read from the base array and are therefore identical, bit for bit,
/// across all views of the same storage.
class NoisePath {
 public:
  static NoisePath sample(std::uint64_t seed, int m, double horizon, double dt);

  int noise_dim() const noexcept { return store_->m; }
  double dt() const noexcept { return store_->dt; }
  std::uint64_t seed() const noexcept { return store_->seed; }
  int refinement_level() const noexcept { return store_->level; }
  /// Horizon U of the window the storage was sampled on.
  double sampled_horizon() const noexcept { return static_cast<double>(store_->half) * store_->dt; }

  long anchor() const noexcept { return anchor_; }
  double anchor_time() const noexcept { return static_cast<double>(anchor_) * dt(); }

  /// Relative node range available in this view.
  long first_node() const noexcept { return -(store_->half + anchor_); }
  long last_node() const noexcept { return store_->half - anchor_; }
  long node_count() const noexcept { return last_node() - first_node() + 1; }
  double window_begin() const noexcept { return static_cast<double>(first_node()) * dt(); }
  double window_end() const noexcept { return static_cast<double>(last_node()) * dt(); }

  long node_of(double t) const { return grid_nodes(t, dt()); }
  double time_of(long node) const noexcept { return static_cast<double>(node) * dt(); }

  /// W_i at relative node k.
  double value(int i, long node) const;
  Vector value(long node) const;
  /// W_i(k + 1) - W_i(k) at relative node k; independent of the anchor.
  double increment(int i, long node) const;
  Vector increment(long node) const;
  /// W_i(to) - W_i(from) read directly from storage, so it does not depend
  /// on the anchor; equals increment(i, from) when to = from + 1.
  double difference(int i, long from, long to) const;
  /// Contiguous increments of component i starting at relative node `from`.
  std::span<const double> increments(int i, long from, long count) const;

  /// Throws WindowError unless relative nodes [from, to] are inside the window.
  void require_nodes(long from, long to, const char* what) const;

  /// theta(t, .): path evaluating to W(t + s) - W(t) at node s.
  NoisePath shifted(double t) const { return shifted_nodes(node_of(t)); }
  NoisePath shifted_nodes(long k) const;

  /// Brownian-bridge refinement inserting factor - 1 points per interval.
  /// Coarse-node values are preserved exactly.
  NoisePath refined(int factor) const;

  bool same_storage(const NoisePath& other) const noexcept { return store_ == other.store_; }

  /// Flat CSV: comment header (seed, dt, U, m, anchor, level) then rows t,W_1..W_m
  /// over the whole sampled window.
  void write_csv(std::ostream& out) const;
  static NoisePath read_csv(std::istream& in);
  void write_binary(std::ostream& out) const;
  static NoisePath read_binary(std::istream& in);

 private:
  struct Storage {
    int m = 0;
    double dt = 0.0;
    long half = 0;
    std::uint64_t seed = 0;
    int level = 0;
    // per component, index 0 is node -half
    std::vector<std::vector<double>> cumulative;
    std::vector<std::vector<double>> increments;
  };

  NoisePath(std::shared_ptr<const Storage> store, long anchor) : store_(std::move(store)), anchor_(anchor) {}
  static std::shared_ptr<Storage> finish(std::shared_ptr<Storage> s);
  long storage_index(long node) const noexcept { return store_->half + anchor_ + node; }

  std::shared_ptr<const Storage> store_;
  long anchor_ = 0;
};

/// Driving field of an autonomous system: F(t, x) = b(x) t + sum_i g_i(x) W_i(t).
struct HelixField {
  std::function<Vector(const Vector&)> drift;
  std::vector<std::function<Vector(const Vector&)>> diffusions;

  Vector evaluate(const NoisePath& path, long node, const Vector& x) const;
};

/// Max over probes of |F(t+s, x, w) - F(t, x, theta(s, w)) - F(s, x, w)|.
double verify_helix(const HelixField& field, const NoisePath& path, double s, double t,
                    std::span<const Vector> probes);

}  // namespace rds
