#include "dmri/signal.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dmri {

Eigen::Index SignalSet::index(Eigen::Index seq, Eigen::Index dir, Eigen::Index pos_amp) const {
  return seq * scheme.values_per_sequence() + dir * scheme.num_nonzero_amplitudes() + pos_amp;
}

double SignalSet::normalized(Eigen::Index flat) const {
  const Eigen::Index seq = flat / scheme.values_per_sequence();
  return std::abs(values[flat]) / std::abs(references[seq]);
}

VecX SignalSet::normalized_all() const {
  VecX out(static_cast<Eigen::Index>(values.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normalized(i);
  return out;
}

CMatX expm_neg(const CMatX& K, double dt) {
  if (K.rows() != K.cols()) throw ValidationError("matrix exponential needs a square matrix");
  if (!(dt > 0.0)) throw ValidationError("matrix exponential step must be positive");

  CMatX A = (-dt) * K;
  const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1)) throw NumericalError("non-finite entries in Bloch-Torrey operator");

  // Pade-13 with scaling and squaring; theta_13 per Higham's expm analysis.
  constexpr double kTheta13 = 5.371920351148152;
  int squarings = 0;
  if (norm1 > kTheta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
    if (squarings > 64) {
      std::ostringstream msg;
      msg << "matrix exponential overflow: ||K dt||_1 = " << norm1;
      throw NumericalError(msg.str());
    }
    A *= std::pow(2.0, -squarings);
  }

  static const double b[14] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                               1187353796428800.0,  129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,       1323241920.0,
                               40840800.0,          960960.0,            16380.0,
                               182.0,               1.0};

  const Eigen::Index n = A.rows();
  const CMatX I = CMatX::Identity(n, n);
  const CMatX A2 = A * A;
  const CMatX A4 = A2 * A2;
  const CMatX A6 = A2 * A4;
  const CMatX U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 +
                       b[3] * A2 + b[1] * I);
  const CMatX V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 +
                  b[2] * A2 + b[0] * I;

  Eigen::PartialPivLU<CMatX> lu(V - U);
  CMatX F = lu.solve(V + U);
  for (int s = 0; s < squarings; ++s) F = F * F;
  return F;
}

CVecX exp_propagate(const CMatX& K, double dt, const CVecX& nu) {
  if (K.rows() != nu.size())
    throw ValidationError("operator and state dimensions do not match");
  return expm_neg(K, dt) * nu;
}

namespace {

// Free-interval propagation (f = 0): diagonal when the relaxation projection
// is zero, otherwise a dense exponential of diag(lambda) + T.
struct FreePropagator {
  const LaplaceBasis& basis;
  bool diagonal;

  explicit FreePropagator(const LaplaceBasis& b)
      : basis(b), diagonal(b.T.isZero(0.0)) {}

  CVecX apply(const CVecX& nu, double dt) const {
    if (dt <= 0.0) return nu;
    if (diagonal)
      return (-dt * basis.eigenvalues.array()).exp().matrix().cast<cdouble>().asDiagonal() * nu;
    CMatX k0 = (MatX(basis.eigenvalues.asDiagonal()) + basis.T).cast<cdouble>();
    return expm_neg(k0, dt) * nu;
  }
};

cdouble unconjugated_dot(const CVecX& a, const VecX& b) {
  cdouble sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

}  // namespace

SignalSet simulate(const LaplaceBasis& basis, const PhysicsParams& params,
                   const GradientScheme& scheme) {
  params.validate();
  scheme.validate();
  if (basis.moments.size() != basis.size())
    throw ValidationError("basis is missing projected operators; run project_operators");

  const Eigen::Index n = basis.size();
  const CVecX nu0 = (params.rho * basis.moments).cast<cdouble>();
  const FreePropagator free_prop(basis);
  const MatX lambda_t = MatX(basis.eigenvalues.asDiagonal()) + basis.T;

  SignalSet out;
  out.scheme = scheme;
  out.solver = "mf";
  out.references.resize(scheme.sequences.size());
  out.values.resize(scheme.num_values());

  std::vector<double> pos_amps;
  for (Eigen::Index a = 0; a < scheme.amplitudes.size(); ++a) {
    if (scheme.amplitudes[a] > 0.0) pos_amps.push_back(scheme.amplitudes[a]);
  }

  for (size_t s = 0; s < scheme.sequences.size(); ++s) {
    const PgseSequence& seq = scheme.sequences[s];
    out.references[s] = unconjugated_dot(free_prop.apply(nu0, seq.t_echo), basis.moments);

    for (Eigen::Index d = 0; d < scheme.directions.rows(); ++d) {
      const Vec3 dir = scheme.directions.row(d);
      const MatX a_dir = dir[0] * basis.Ax + dir[1] * basis.Ay + dir[2] * basis.Az;
      for (size_t a = 0; a < pos_amps.size(); ++a) {
        const double g = pos_amps[a];
        CMatX k_pulse(n, n);
        k_pulse.real() = lambda_t;
        k_pulse.imag() = (params.gamma * g) * a_dir;
        const CMatX e_pulse = expm_neg(k_pulse, seq.delta);

        CVecX nu = nu0;
        for (const auto& iv : seq.intervals()) {
          if (iv.f == 0) {
            nu = free_prop.apply(nu, iv.duration);
          } else if (iv.f > 0) {
            nu = e_pulse * nu;
          } else {
            nu = e_pulse.conjugate() * nu;
          }
        }
        out.values[out.index(s, d, a)] = unconjugated_dot(nu, basis.moments);
      }
    }
  }
  return out;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

void write_signal_csv(const SignalSet& signals, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write signal CSV: " + path.string());
  out << "solver,seq_id,delta,Delta,g,b,dir_x,dir_y,dir_z,re,im,magnitude,normalized\n";

  std::vector<double> pos_amps;
  for (Eigen::Index a = 0; a < signals.scheme.amplitudes.size(); ++a) {
    if (signals.scheme.amplitudes[a] > 0.0) pos_amps.push_back(signals.scheme.amplitudes[a]);
  }

  for (size_t s = 0; s < signals.scheme.sequences.size(); ++s) {
    const PgseSequence& seq = signals.scheme.sequences[s];
    const cdouble ref = signals.references[s];
    out << signals.solver << ',' << s << ',' << fmt17(seq.delta) << ',' << fmt17(seq.Delta)
        << ",0,0,0,0,0," << fmt17(ref.real()) << ',' << fmt17(ref.imag()) << ','
        << fmt17(std::abs(ref)) << ",1\n";
    for (Eigen::Index d = 0; d < signals.scheme.directions.rows(); ++d) {
      for (size_t a = 0; a < pos_amps.size(); ++a) {
        const Eigen::Index flat = signals.index(s, d, a);
        const cdouble v = signals.values[flat];
        const double g = pos_amps[a];
        out << signals.solver << ',' << s << ',' << fmt17(seq.delta) << ',' << fmt17(seq.Delta)
            << ',' << fmt17(g) << ',' << fmt17(b_value(seq, g)) << ','
            << fmt17(signals.scheme.directions(d, 0)) << ','
            << fmt17(signals.scheme.directions(d, 1)) << ','
            << fmt17(signals.scheme.directions(d, 2)) << ',' << fmt17(v.real()) << ','
            << fmt17(v.imag()) << ',' << fmt17(std::abs(v)) << ','
            << fmt17(signals.normalized(flat)) << "\n";
      }
    }
  }
}

SignalSet read_signal_csv(const std::filesystem::path& path, const GradientScheme& scheme) {
  scheme.validate();
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open signal CSV: " + path.string());

  SignalSet out;
  out.scheme = scheme;
  out.references.resize(scheme.sequences.size());
  out.values.resize(scheme.num_values());
  std::vector<char> seen(out.values.size(), 0);
  std::vector<char> seen_ref(out.references.size(), 0);

  std::vector<double> pos_amps;
  for (Eigen::Index a = 0; a < scheme.amplitudes.size(); ++a) {
    if (scheme.amplitudes[a] > 0.0) pos_amps.push_back(scheme.amplitudes[a]);
  }

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty signal CSV: " + path.string());
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 13)
      throw ValidationError("signal CSV row " + std::to_string(lineno) + " has " +
                            std::to_string(f.size()) + " fields, want 13");
    const auto ctx = "signal CSV row " + std::to_string(lineno);
    double vals[11];
    try {
      for (int i = 0; i < 11; ++i) vals[i] = std::stod(f[i + 2]);
    } catch (const std::exception&) {
      throw ValidationError(ctx + ": non-numeric field");
    }
    out.solver = f[0];
    long seq_id = -1;
    try {
      seq_id = std::stol(f[1]);
    } catch (const std::exception&) {
      throw ValidationError(ctx + ": non-numeric sequence id");
    }
    if (seq_id < 0 || seq_id >= static_cast<long>(scheme.sequences.size()))
      throw ValidationError(ctx + ": sequence id out of range");
    const PgseSequence& seq = scheme.sequences[seq_id];
    if (std::abs(vals[0] - seq.delta) > 1e-9 || std::abs(vals[1] - seq.Delta) > 1e-9)
      throw ValidationError(ctx + ": sequence timing does not match the scheme");
    const double g = vals[2];
    const cdouble value(vals[7], vals[8]);
    if (g == 0.0) {
      out.references[seq_id] = value;
      seen_ref[seq_id] = 1;
      continue;
    }
    const Vec3 dir(vals[4], vals[5], vals[6]);
    Eigen::Index dir_idx = -1;
    for (Eigen::Index d = 0; d < scheme.directions.rows(); ++d) {
      if ((Vec3(scheme.directions.row(d)) - dir).norm() < 1e-9) {
        dir_idx = d;
        break;
      }
    }
    if (dir_idx < 0) throw ValidationError(ctx + ": direction not present in the scheme");
    Eigen::Index amp_idx = -1;
    for (size_t a = 0; a < pos_amps.size(); ++a) {
      if (std::abs(pos_amps[a] - g) < 1e-12 * std::max(1.0, g)) {
        amp_idx = static_cast<Eigen::Index>(a);
        break;
      }
    }
    if (amp_idx < 0) throw ValidationError(ctx + ": amplitude not present in the scheme");
    const Eigen::Index flat = out.index(seq_id, dir_idx, amp_idx);
    out.values[flat] = value;
    seen[flat] = 1;
  }
  for (char c : seen) {
    if (!c) throw ValidationError("signal CSV is missing measurements for the scheme");
  }
  for (char c : seen_ref) {
    if (!c) throw ValidationError("signal CSV is missing a g = 0 reference row");
  }
  return out;
}

}  // namespace dmri
