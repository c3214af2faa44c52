#pragma once

// Piecewise-quadratic functions of one real variable.
//
// A PiecewiseQuad is a list of closed pieces tiling a fixed domain [lo, hi].
// Each piece is either a convex quadratic a*m^2 + b*m + c or infeasible
// (value +infinity). These are the cost-to-come functions of the
// changepoint dynamic program in solver.hpp.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace gccd::pwq {

inline constexpr double kMergeTolerance = 1e-12;
inline constexpr double kContinuityTolerance = 1e-9;
inline constexpr double kDiscriminantCutoff = 1e-14;

/// How a piece was produced by the most recent envelope operation.
enum class Derivation : std::uint8_t {
  carried,  ///< unchanged provenance
  follow,   ///< envelope tracks the source piece, shifted by the gap
  flat,     ///< envelope is constant at the source minimum reached at `anchor`
};

/// Bookkeeping attached to each piece. The algebra never inspects `label`;
/// it is copied from whichever input piece a result piece came from. 0 means
/// no label.
struct Provenance {
  std::uint32_t label = 0;
  Derivation derivation = Derivation::carried;
  double anchor = 0.0;
  int branch = -1;

  bool operator==(const Provenance&) const = default;
};

struct QuadPiece {
  double lo = 0.0;
  double hi = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  bool feasible = true;
  Provenance prov;

  /// Quadratic value, ignoring feasibility and bounds.
  [[nodiscard]] double eval(double m) const { return (a * m + b) * m + c; }
  /// Minimum over [lo, hi]; ties go to the smaller point.
  [[nodiscard]] double argmin() const;
};

class PiecewiseQuad {
 public:
  PiecewiseQuad() = default;

  /// Builds from explicit pieces, checking the tiling and convexity, then
  /// canonicalizes (tiny pieces dropped, equal neighbours merged).
  static PiecewiseQuad from_pieces(std::vector<QuadPiece> pieces);

  static PiecewiseQuad quadratic(double lo, double hi, double a, double b, double c);
  static PiecewiseQuad constant(double lo, double hi, double value);
  static PiecewiseQuad infeasible(double lo, double hi);

  [[nodiscard]] double lo() const { return lo_; }
  [[nodiscard]] double hi() const { return hi_; }
  [[nodiscard]] std::span<const QuadPiece> pieces() const { return pieces_; }
  [[nodiscard]] std::size_t size() const { return pieces_.size(); }
  [[nodiscard]] bool empty() const { return pieces_.empty(); }

  /// Value at m (+infinity on infeasible pieces). At a shared breakpoint the
  /// smaller of the two one-sided values is returned, so the function is
  /// lower semicontinuous. Throws std::out_of_range outside the domain.
  [[nodiscard]] double operator()(double m) const;

  /// Index of the piece containing m (the left one at a shared breakpoint).
  [[nodiscard]] std::size_t locate(double m) const;

  [[nodiscard]] bool all_infeasible() const;
  /// Smallest interval containing every feasible piece.
  [[nodiscard]] std::optional<std::pair<double, double>> feasible_hull() const;

  /// g(m) = f(-m) on [-hi, -lo].
  [[nodiscard]] PiecewiseQuad reflected() const;

  /// Mutable access for operations that only touch coefficients or
  /// provenance; call canonicalize() afterwards if merges may be possible.
  std::vector<QuadPiece>& mutable_pieces() { return pieces_; }

  /// Drops pieces narrower than 1e-12 of the domain and merges neighbours
  /// with equal provenance and coefficients, in place.
  void canonicalize();

 private:
  friend PiecewiseQuad make_canonical(std::vector<QuadPiece>, double, double);
  friend void pointwise_min_into(const PiecewiseQuad&, const PiecewiseQuad&, PiecewiseQuad&);
  friend void min_leq_envelope_into(const PiecewiseQuad&, double, PiecewiseQuad&);
  friend void min_geq_envelope_into(const PiecewiseQuad&, double, PiecewiseQuad&);
  double lo_ = 0.0;
  double hi_ = 0.0;
  std::vector<QuadPiece> pieces_;
};

/// Canonicalizes a tiling of [lo, hi] without the input checks of from_pieces.
PiecewiseQuad make_canonical(std::vector<QuadPiece> pieces, double lo, double hi);

/// f(m) + (y - m)^2.
PiecewiseQuad add_point_loss(PiecewiseQuad f, double y);
/// f(m) + k.
PiecewiseQuad add_constant(PiecewiseQuad f, double k);

/// min(f(m), g(m)). Ties keep f's piece. Throws std::invalid_argument when
/// the domains differ.
PiecewiseQuad pointwise_min(const PiecewiseQuad& f, const PiecewiseQuad& g);

/// m -> inf { f(x) : lo <= x <= m - gap }. Infeasible on [lo, lo + gap).
/// Throws std::domain_error when gap >= hi - lo, std::invalid_argument when
/// gap < 0.
PiecewiseQuad min_leq_envelope(const PiecewiseQuad& f, double gap);

/// m -> inf { f(x) : m + gap <= x <= hi }. Infeasible on (hi - gap, hi].
PiecewiseQuad min_geq_envelope(const PiecewiseQuad& f, double gap);

// Variants writing into `out`, reusing its storage. `out` must not alias
// an input.
void pointwise_min_into(const PiecewiseQuad& f, const PiecewiseQuad& g, PiecewiseQuad& out);
void min_leq_envelope_into(const PiecewiseQuad& f, double gap, PiecewiseQuad& out);
void min_geq_envelope_into(const PiecewiseQuad& f, double gap, PiecewiseQuad& out);

struct Minimum {
  double argmin = 0.0;
  double value = 0.0;
  std::size_t piece = 0;
};

/// Global minimum over the feasible part; ties toward smaller m.
/// Throws std::domain_error when nothing is feasible.
Minimum global_min(const PiecewiseQuad& f);

}  // namespace gccd::pwq
