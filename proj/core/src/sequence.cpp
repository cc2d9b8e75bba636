#include "dmri/sequence.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace dmri {

using nlohmann::json;

PgseSequence::PgseSequence(double delta_, double Delta_, double t_echo_)
    : delta(delta_), Delta(Delta_), t_echo(t_echo_ > 0.0 ? t_echo_ : Delta_ + delta_) {
  validate();
}

void PgseSequence::validate() const {
  if (!(delta > 0.0)) throw ValidationError("PGSE delta must be positive");
  if (!(delta <= Delta)) throw ValidationError("PGSE requires delta <= Delta");
  if (!(t_echo >= Delta + delta)) throw ValidationError("PGSE requires t_echo >= Delta + delta");
}

int PgseSequence::profile(double t) const {
  if (t < 0.0 || t > t_echo) return 0;
  if (t < delta) return 1;
  if (t < Delta) return 0;
  if (t < Delta + delta) return -1;
  return 0;
}

std::vector<PgseSequence::Interval> PgseSequence::intervals() const {
  std::vector<Interval> out;
  auto push = [&out](double duration, int f) {
    if (duration > 0.0) out.push_back({duration, f});
  };
  push(delta, 1);
  push(Delta - delta, 0);
  push(delta, -1);
  push(t_echo - Delta - delta, 0);
  return out;
}

double b_value(const PgseSequence& seq, double g, double gamma) {
  seq.validate();
  const double q = gamma * g * seq.delta;
  return q * q * (seq.Delta - seq.delta / 3.0);
}

double amplitude_for_b(const PgseSequence& seq, double b, double gamma) {
  seq.validate();
  if (b < 0.0) throw ValidationError("b-value must be non-negative");
  if (b == 0.0) return 0.0;
  return std::sqrt(b / (seq.Delta - seq.delta / 3.0)) / (gamma * seq.delta);
}

MatX3 direction_set(int n) {
  if (n <= 0) throw ValidationError("direction count must be positive");
  if (n == 3) {
    MatX3 axes(3, 3);
    axes << 1, 0, 0, 0, 1, 0, 0, 0, 1;
    return axes;
  }
  // Deterministic Fibonacci-hemisphere start.
  MatX3 dirs(n, 3);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = (i + 0.5) / n;  // upper hemisphere
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs.row(i) << r * std::cos(golden * i), r * std::sin(golden * i), z;
  }
  // Antipodal electrostatic repulsion: minimize sum 1/|xi-xj| + 1/|xi+xj|
  // by projected gradient steps on the sphere.
  const int iters = 300;
  const double step = 0.05 / n;
  for (int it = 0; it < iters; ++it) {
    MatX3 force = MatX3::Zero(n, 3);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const Vec3 diff = Vec3(dirs.row(i)) - Vec3(dirs.row(j));
        const Vec3 sum = Vec3(dirs.row(i)) + Vec3(dirs.row(j));
        const double dn = std::max(diff.norm(), 1e-9);
        const double sn = std::max(sum.norm(), 1e-9);
        force.row(i) += (diff / (dn * dn * dn) + sum / (sn * sn * sn)).transpose();
      }
    }
    for (int i = 0; i < n; ++i) {
      const Vec3 x = dirs.row(i);
      Vec3 f = force.row(i);
      f -= f.dot(x) * x;  // tangent component
      dirs.row(i) = (x + step * f).normalized().transpose();
    }
  }
  return dirs;
}

void GradientScheme::validate() const {
  if (directions.rows() == 0) throw ValidationError("scheme has no directions");
  if (sequences.empty()) throw ValidationError("scheme has no sequences");
  if (amplitudes.size() == 0) throw ValidationError("scheme has no amplitudes");
  for (Eigen::Index i = 0; i < directions.rows(); ++i) {
    if (std::abs(directions.row(i).norm() - 1.0) > 1e-12)
      throw ValidationError("direction " + std::to_string(i) + " is not unit length");
  }
  bool has_reference = false;
  for (Eigen::Index i = 0; i < amplitudes.size(); ++i) {
    if (amplitudes[i] < 0.0) throw ValidationError("gradient amplitudes must be >= 0");
    if (amplitudes[i] == 0.0) has_reference = true;
  }
  if (!has_reference)
    throw ValidationError("scheme must include a g = 0 reference amplitude");
  for (const auto& seq : sequences) seq.validate();
}

Eigen::Index GradientScheme::num_nonzero_amplitudes() const {
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < amplitudes.size(); ++i) {
    if (amplitudes[i] > 0.0) ++n;
  }
  return n;
}

Eigen::Index GradientScheme::values_per_sequence() const {
  return directions.rows() * num_nonzero_amplitudes();
}

bool GradientScheme::approx_equal(const GradientScheme& other, double tol) const {
  if (directions.rows() != other.directions.rows() ||
      amplitudes.size() != other.amplitudes.size() || sequences.size() != other.sequences.size())
    return false;
  if ((directions - other.directions).cwiseAbs().maxCoeff() > tol) return false;
  if ((amplitudes - other.amplitudes).cwiseAbs().maxCoeff() > tol) return false;
  for (size_t s = 0; s < sequences.size(); ++s) {
    if (std::abs(sequences[s].delta - other.sequences[s].delta) > tol ||
        std::abs(sequences[s].Delta - other.sequences[s].Delta) > tol ||
        std::abs(sequences[s].t_echo - other.sequences[s].t_echo) > tol)
      return false;
  }
  return true;
}

GradientScheme make_scheme(int ndir, const std::vector<double>& diffusion_times,
                           const std::vector<double>& b_values, double delta) {
  if (diffusion_times.empty()) throw ValidationError("need at least one diffusion time");
  if (b_values.empty()) throw ValidationError("need at least one b-value");
  GradientScheme scheme;
  scheme.directions = direction_set(ndir);
  scheme.sequences.reserve(diffusion_times.size());
  for (double Delta : diffusion_times) scheme.sequences.emplace_back(delta, Delta);

  // Amplitudes realize the requested b-values on the first sequence; the
  // scheme stores amplitudes, so later sequences see the same g (and thus a
  // Delta-dependent b), matching scanner practice of fixed gradient strength.
  std::vector<double> amps{0.0};
  for (double b : b_values) {
    if (b > 0.0) amps.push_back(amplitude_for_b(scheme.sequences.front(), b));
  }
  scheme.amplitudes = Eigen::Map<VecX>(amps.data(), amps.size());
  scheme.validate();
  return scheme;
}

void save_scheme(const GradientScheme& scheme, const std::filesystem::path& path) {
  scheme.validate();
  json rows = json::array();
  for (size_t s = 0; s < scheme.sequences.size(); ++s) {
    const auto& seq = scheme.sequences[s];
    auto row = [&](const Vec3& dir, double g) {
      return json{{"direction", {dir[0], dir[1], dir[2]}},
                  {"g", g},
                  {"delta", seq.delta},
                  {"Delta", seq.Delta},
                  {"t_echo", seq.t_echo}};
    };
    rows.push_back(row(Vec3::Zero(), 0.0));  // reference
    for (Eigen::Index d = 0; d < scheme.directions.rows(); ++d) {
      for (Eigen::Index a = 0; a < scheme.amplitudes.size(); ++a) {
        if (scheme.amplitudes[a] > 0.0) rows.push_back(row(scheme.directions.row(d), scheme.amplitudes[a]));
      }
    }
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write scheme file: " + path.string());
  out << rows.dump(2) << "\n";
}

GradientScheme load_scheme(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scheme file: " + path.string());
  json rows;
  try {
    in >> rows;
  } catch (const json::exception& e) {
    throw ValidationError("scheme file is not valid JSON: " + std::string(e.what()));
  }
  if (!rows.is_array() || rows.empty()) throw ValidationError("scheme file must be a JSON array");

  GradientScheme scheme;
  std::vector<Vec3> dirs;
  std::vector<double> amps{0.0};
  auto find_or_add_seq = [&](const PgseSequence& seq) {
    for (const auto& s : scheme.sequences) {
      if (std::abs(s.delta - seq.delta) < 1e-12 && std::abs(s.Delta - seq.Delta) < 1e-12 &&
          std::abs(s.t_echo - seq.t_echo) < 1e-12)
        return;
    }
    scheme.sequences.push_back(seq);
  };
  try {
    for (const auto& row : rows) {
      const PgseSequence seq(row.at("delta").get<double>(), row.at("Delta").get<double>(),
                             row.at("t_echo").get<double>());
      find_or_add_seq(seq);
      const double g = row.at("g").get<double>();
      if (g < 0.0) throw ValidationError("scheme amplitude must be >= 0");
      if (g == 0.0) continue;
      if (std::find_if(amps.begin(), amps.end(),
                       [&](double a) { return std::abs(a - g) < 1e-15; }) == amps.end())
        amps.push_back(g);
      const auto& d = row.at("direction");
      const Vec3 dir(d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>());
      if (std::find_if(dirs.begin(), dirs.end(), [&](const Vec3& x) {
            return (x - dir).norm() < 1e-12;
          }) == dirs.end())
        dirs.push_back(dir);
    }
  } catch (const json::exception& e) {
    throw ValidationError("malformed scheme row: " + std::string(e.what()));
  }
  if (dirs.empty()) throw ValidationError("scheme file contains no g > 0 measurements");
  scheme.directions.resize(dirs.size(), 3);
  for (size_t i = 0; i < dirs.size(); ++i) scheme.directions.row(i) = dirs[i].transpose();
  scheme.amplitudes = Eigen::Map<VecX>(amps.data(), amps.size());
  scheme.validate();

  // The factored lists must reproduce the file's measurement count.
  const Eigen::Index expected =
      static_cast<Eigen::Index>(scheme.sequences.size()) * (scheme.values_per_sequence() + 1);
  if (expected != static_cast<Eigen::Index>(rows.size()))
    throw ValidationError("scheme file is not a full sequences x directions x amplitudes product");
  return scheme;
}

}  // namespace dmri
