#include "rds/noise_path.hpp"

#include "rds/rng.hpp"

#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace rds {

namespace {

constexpr char kBinaryMagic[8] = {'R', 'D', 'S', 'P', 'A', 'T', 'H', '1'};

// Philox stream ids. Refinement level L draws from stream kRefineStream + L.
constexpr std::uint32_t kSampleStream = 0;
constexpr std::uint32_t kRefineStream = 1;

}  // namespace

long grid_nodes(double t, double dt, const char* what) {
  if (!(dt > 0.0) || !std::isfinite(t)) {
    throw GridError(std::string(what) + ": invalid time or step");
  }
  const double ratio = t / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, std::abs(rounded))) {
    std::ostringstream msg;
    msg << what << " " << t << " is not a multiple of the grid step " << dt;
    throw GridError(msg.str());
  }
  return static_cast<long>(rounded);
}

std::shared_ptr<NoisePath::Storage> NoisePath::finish(std::shared_ptr<Storage> s) {
  s->increments.assign(s->m, std::vector<double>(2 * s->half));
  for (int i = 0; i < s->m; ++i) {
    const auto& c = s->cumulative[i];
    auto& inc = s->increments[i];
    for (long j = 0; j < 2 * s->half; ++j) inc[j] = c[j + 1] - c[j];
  }
  return s;
}

NoisePath NoisePath::sample(std::uint64_t seed, int m, double horizon, double dt) {
  if (m < 1) throw InvalidArgument("noise dimension must be positive");
  if (!(horizon > 0.0) || !(dt > 0.0)) throw InvalidArgument("horizon and dt must be positive");
  const long half = grid_nodes(horizon, dt, "horizon");
  if (half < 1) throw GridError("horizon shorter than one grid step");

  auto s = std::make_shared<Storage>();
  s->m = m;
  s->dt = dt;
  s->half = half;
  s->seed = seed;
  s->cumulative.assign(m, std::vector<double>(2 * half + 1, 0.0));

  const Philox4x32 gen(seed);
  const double sd = std::sqrt(dt);
  // Interval j in [0, 2 half) covers nodes j - half .. j - half + 1. Normals
  // come in Box-Muller pairs addressed by j / 2.
  for (int i = 0; i < m; ++i) {
    std::vector<double> z(2 * half);
    for (long j = 0; j < 2 * half; j += 2) {
      const auto [z0, z1] = normal_pair(gen, kSampleStream, static_cast<std::uint64_t>(j / 2),
                                        static_cast<std::uint32_t>(i));
      z[j] = z0;
      if (j + 1 < 2 * half) z[j + 1] = z1;
    }
    auto& c = s->cumulative[i];
    for (long j = half; j < 2 * half; ++j) c[j + 1] = c[j] + sd * z[j];
    for (long j = half - 1; j >= 0; --j) c[j] = c[j + 1] - sd * z[j];
  }
  return NoisePath(finish(std::move(s)), 0);
}

void NoisePath::require_nodes(long from, long to, const char* what) const {
  if (from < first_node() || to > last_node()) {
    const double need = std::max(static_cast<double>(first_node() - from),
                                 static_cast<double>(to - last_node())) * dt();
    std::ostringstream msg;
    msg << what << ": nodes [" << from << ", " << to << "] fall outside the path window ["
        << first_node() << ", " << last_node() << "]; a margin of " << need
        << " more time units is required";
    throw WindowError(msg.str());
  }
}

double NoisePath::value(int i, long node) const {
  require_nodes(node, node, "value");
  const auto& c = store_->cumulative[i];
  return c[storage_index(node)] - c[storage_index(0)];
}

Vector NoisePath::value(long node) const {
  Vector w(noise_dim());
  for (int i = 0; i < noise_dim(); ++i) w[i] = value(i, node);
  return w;
}

double NoisePath::increment(int i, long node) const {
  require_nodes(node, node + 1, "increment");
  return store_->increments[i][storage_index(node)];
}

Vector NoisePath::increment(long node) const {
  require_nodes(node, node + 1, "increment");
  Vector w(noise_dim());
  const long idx = storage_index(node);
  for (int i = 0; i < noise_dim(); ++i) w[i] = store_->increments[i][idx];
  return w;
}

double NoisePath::difference(int i, long from, long to) const {
  require_nodes(std::min(from, to), std::max(from, to), "difference");
  const auto& c = store_->cumulative[i];
  return c[storage_index(to)] - c[storage_index(from)];
}

std::span<const double> NoisePath::increments(int i, long from, long count) const {
  if (count <= 0) return {};
  require_nodes(from, from + count, "increments");
  return std::span<const double>(store_->increments[i].data() + storage_index(from),
                                 static_cast<std::size_t>(count));
}

NoisePath NoisePath::shifted_nodes(long k) const {
  if (k < first_node() || k > last_node()) {
    std::ostringstream msg;
    msg << "shift by " << static_cast<double>(k) * dt() << " leaves the window [" << window_begin() << ", "
        << window_end() << "]; the path needs a margin of at least "
        << static_cast<double>(std::abs(k)) * dt();
    throw WindowError(msg.str());
  }
  return NoisePath(store_, anchor_ + k);
}

NoisePath NoisePath::refined(int factor) const {
  if (factor < 2) throw InvalidArgument("refinement factor must be an integer >= 2");
  const Storage& c = *store_;
  auto s = std::make_shared<Storage>();
  s->m = c.m;
  s->dt = c.dt / factor;
  s->half = c.half * factor;
  s->seed = c.seed;
  s->level = c.level + 1;
  s->cumulative.assign(c.m, std::vector<double>(2 * s->half + 1));

  const Philox4x32 gen(c.seed);
  const std::uint32_t stream = kRefineStream + static_cast<std::uint32_t>(c.level);
  const double fine_dt = s->dt;
  for (int i = 0; i < c.m; ++i) {
    const auto& coarse = c.cumulative[i];
    auto& fine = s->cumulative[i];
    for (long j = 0; j < 2 * c.half; ++j) {
      const double right = coarse[j + 1];
      double prev = coarse[j];
      fine[j * factor] = prev;
      // Sequential bridge: each point is drawn conditionally on the previous
      // inserted point and the fixed right endpoint.
      for (int q = 1; q < factor; ++q) {
        const double remaining = static_cast<double>(factor - q + 1);
        const double mean = prev + (right - prev) / remaining;
        const double var = fine_dt * (remaining - 1.0) / remaining;
        const auto z = normal_pair(gen, stream, static_cast<std::uint64_t>(j) * factor + q,
                                   static_cast<std::uint32_t>(i)).first;
        prev = mean + std::sqrt(var) * z;
        fine[j * factor + q] = prev;
      }
    }
    fine[2 * s->half] = coarse[2 * c.half];
  }
  return NoisePath(finish(std::move(s)), anchor_ * factor);
}

void NoisePath::write_csv(std::ostream& out) const {
  const Storage& s = *store_;
  out << "# seed=" << s.seed << "\n# dt=" << std::hexfloat << s.dt << "\n# U=" << sampled_horizon()
      << std::defaultfloat << "\n# m=" << s.m << "\n# anchor=" << anchor_
      << "\n# level=" << s.level << "\n";
  out << "t";
  for (int i = 0; i < s.m; ++i) out << ",W" << (i + 1);
  out << "\n";
  out << std::setprecision(17);
  for (long j = 0; j <= 2 * s.half; ++j) {
    out << static_cast<double>(j - s.half) * s.dt;
    for (int i = 0; i < s.m; ++i) out << ',' << s.cumulative[i][j];
    out << "\n";
  }
}

NoisePath NoisePath::read_csv(std::istream& in) {
  auto s = std::make_shared<Storage>();
  long anchor = 0;
  double horizon = 0.0;
  std::string line;
  while (std::getline(in, line) && line.rfind("# ", 0) == 0) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(2, eq - 2);
    const std::string val = line.substr(eq + 1);
    if (key == "seed") s->seed = std::stoull(val);
    else if (key == "dt") s->dt = std::strtod(val.c_str(), nullptr);
    else if (key == "U") horizon = std::strtod(val.c_str(), nullptr);
    else if (key == "m") s->m = std::stoi(val);
    else if (key == "anchor") anchor = std::stol(val);
    else if (key == "level") s->level = std::stoi(val);
  }
  if (s->m < 1 || !(s->dt > 0.0)) throw InvalidArgument("path CSV: missing m or dt header");
  s->half = grid_nodes(horizon, s->dt, "path CSV horizon");
  s->cumulative.assign(s->m, std::vector<double>(2 * s->half + 1));
  // `line` now holds the column header.
  for (long j = 0; j <= 2 * s->half; ++j) {
    if (!std::getline(in, line)) throw InvalidArgument("path CSV: truncated table");
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    for (int i = 0; i < s->m; ++i) {
      if (!std::getline(row, cell, ',')) throw InvalidArgument("path CSV: short row");
      s->cumulative[i][j] = std::strtod(cell.c_str(), nullptr);
    }
  }
  return NoisePath(finish(std::move(s)), anchor);
}

void NoisePath::write_binary(std::ostream& out) const {
  const Storage& s = *store_;
  auto put = [&out](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  out.write(kBinaryMagic, sizeof(kBinaryMagic));
  put(s.seed);
  put(static_cast<std::int32_t>(s.m));
  put(static_cast<std::int32_t>(s.level));
  put(s.dt);
  put(static_cast<std::int64_t>(s.half));
  put(static_cast<std::int64_t>(anchor_));
  for (int i = 0; i < s.m; ++i) {
    out.write(reinterpret_cast<const char*>(s.cumulative[i].data()),
              static_cast<std::streamsize>(s.cumulative[i].size() * sizeof(double)));
  }
}

NoisePath NoisePath::read_binary(std::istream& in) {
  char magic[sizeof(kBinaryMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kBinaryMagic, sizeof(magic)) != 0) {
    throw InvalidArgument("path binary: bad magic");
  }
  auto get = [&in](auto& v) { in.read(reinterpret_cast<char*>(&v), sizeof(v)); };
  auto s = std::make_shared<Storage>();
  std::int32_t m = 0, level = 0;
  std::int64_t half = 0, anchor = 0;
  get(s->seed);
  get(m);
  get(level);
  get(s->dt);
  get(half);
  get(anchor);
  if (!in || m < 1 || half < 1) throw InvalidArgument("path binary: bad header");
  s->m = m;
  s->level = level;
  s->half = half;
  s->cumulative.assign(m, std::vector<double>(2 * half + 1));
  for (int i = 0; i < m; ++i) {
    in.read(reinterpret_cast<char*>(s->cumulative[i].data()),
            static_cast<std::streamsize>(s->cumulative[i].size() * sizeof(double)));
  }
  if (!in) throw InvalidArgument("path binary: truncated data");
  return NoisePath(finish(std::move(s)), anchor);
}

Vector HelixField::evaluate(const NoisePath& path, long node, const Vector& x) const {
  Vector out = drift(x) * path.time_of(node);
  for (std::size_t i = 0; i < diffusions.size(); ++i) {
    out += diffusions[i](x) * path.value(static_cast<int>(i), node);
  }
  return out;
}

double verify_helix(const HelixField& field, const NoisePath& path, double s, double t,
                    std::span<const Vector> probes) {
  const long ns = path.node_of(s);
  const long nt = path.node_of(t);
  const NoisePath shifted = path.shifted_nodes(ns);
  double worst = 0.0;
  for (const Vector& x : probes) {
    const Vector lhs = field.evaluate(path, ns + nt, x);
    const Vector rhs = field.evaluate(shifted, nt, x) + field.evaluate(path, ns, x);
    worst = std::max(worst, (lhs - rhs).norm());
  }
  return worst;
}

}  // namespace rds
