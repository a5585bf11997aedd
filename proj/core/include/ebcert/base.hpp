#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ebcert {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

/// Numerical tolerances shared across the toolkit. All are configurable;
/// the defaults target double-precision geometry at desk scale.
struct Tolerances {
  double membership = 1e-7;  // |f(x)| / d(x,S) threshold for "x in S"
  double active = 1e-7;      // active-constraint / active-piece detection
  double dist = 1e-7;        // distance / projection refinement target
  double cert = 1e-6;        // certificate residual threshold
};

inline Tolerances& tols() {
  static Tolerances t;
  return t;
}

// ---- error taxonomy ------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& m = "dimension mismatch") : Error(m) {}
};
struct EmptySet : Error {
  explicit EmptySet(const std::string& m = "empty set") : Error(m) {}
};
struct PointNotInSet : Error {
  explicit PointNotInSet(const std::string& m = "point not in set") : Error(m) {}
};
struct PointNotInEpigraph : Error {
  explicit PointNotInEpigraph(const std::string& m = "point not in epigraph") : Error(m) {}
};
struct UnsupportedStructure : Error {
  explicit UnsupportedStructure(const std::string& m = "unsupported structure") : Error(m) {}
};
struct NotDifferentiableHere : Error {
  explicit NotDifferentiableHere(const std::string& m = "not differentiable here") : Error(m) {}
};
struct NumericalInconsistency : Error {
  explicit NumericalInconsistency(const std::string& m = "numerical inconsistency") : Error(m) {}
};
struct SurjectivityFailure : Error {
  explicit SurjectivityFailure(const std::string& m = "Jacobian not surjective") : Error(m) {}
};
struct BoundaryConditionFailure : Error {
  explicit BoundaryConditionFailure(const std::string& m = "boundary condition fails") : Error(m) {}
};
struct NonUniqueProjection : Error {
  explicit NonUniqueProjection(const std::string& m = "projection not unique") : Error(m) {}
};
struct UnboundedBody : Error {
  explicit UnboundedBody(const std::string& m = "body has rays") : Error(m) {}
};
struct OriginNotInBody : Error {
  explicit OriginNotInBody(const std::string& m = "origin not in body") : Error(m) {}
};
struct PointInSolutionSet : Error {
  explicit PointInSolutionSet(const std::string& m = "point lies in the solution set") : Error(m) {}
};
struct PointNotInSolutionSet : Error {
  explicit PointNotInSolutionSet(const std::string& m = "reference point not in solution set") : Error(m) {}
};
struct InfeasibleSystem : Error {
  explicit InfeasibleSystem(const std::string& m = "infeasible system") : Error(m) {}
};
struct SizeLimitExceeded : Error {
  explicit SizeLimitExceeded(const std::string& m = "size limit exceeded") : Error(m) {}
};
struct ParseError : Error {
  int line = 0, col = 0;
  ParseError(const std::string& m, int ln, int cl)
      : Error(m + " (line " + std::to_string(ln) + ", col " + std::to_string(cl) + ")"),
        line(ln), col(cl) {}
};

// ---- deterministic seeding -----------------------------------------------
//
// Every sampling loop derives a per-item seed from (base seed, stream ids) so
// that results are independent of evaluation order and scheduling.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t h = splitmix64(seed ^ 0xd1b54a32d192ed03ULL);
  h = splitmix64(h ^ splitmix64(a));
  h = splitmix64(h ^ splitmix64(b + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ splitmix64(c + 0x9e3779b97f4a7c15ULL));
  return h;
}

/// Order-independent seed material from the bit pattern of a vector.
inline std::uint64_t hash_coords(const Vec& x) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (int i = 0; i < x.size(); ++i) {
    std::uint64_t bits;
    double v = x[i];
    std::memcpy(&bits, &v, sizeof(bits));
    h = splitmix64(h ^ bits);
  }
  return h;
}

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}

  double uniform(double a = 0.0, double b = 1.0) {
    return std::uniform_real_distribution<double>(a, b)(eng);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng); }
  int uniform_int(int a, int b) { return std::uniform_int_distribution<int>(a, b)(eng); }

  Vec unit_vector(int dim) {
    Vec v(dim);
    double n = 0.0;
    do {
      for (int i = 0; i < dim; ++i) v[i] = normal();
      n = v.norm();
    } while (n < 1e-12);
    return v / n;
  }
  /// Uniform sample from the closed ball B(center, radius).
  Vec in_ball(const Vec& center, double radius) {
    const int n = static_cast<int>(center.size());
    Vec d = unit_vector(n);
    double r = radius * std::pow(uniform(), 1.0 / n);
    return center + r * d;
  }
  /// Uniform sample from the shell {r_lo <= |x - center| <= r_hi}.
  Vec in_shell(const Vec& center, double r_lo, double r_hi) {
    const int n = static_cast<int>(center.size());
    Vec d = unit_vector(n);
    double lo = std::pow(r_lo, n), hi = std::pow(r_hi, n);
    double r = std::pow(lo + (hi - lo) * uniform(), 1.0 / n);
    return center + r * d;
  }
};

inline bool approx_eq(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace ebcert
