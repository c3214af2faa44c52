#include "gccd/pwq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gccd::pwq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool close(double x, double y) {
  return std::abs(x - y) <= kMergeTolerance * std::max({1.0, std::abs(x), std::abs(y)});
}

bool mergeable(const QuadPiece& p, const QuadPiece& q) {
  if (!p.feasible || !q.feasible) return !p.feasible && !q.feasible;
  return p.prov.label == q.prov.label && p.prov == q.prov && close(p.a, q.a) && close(p.b, q.b) &&
         close(p.c, q.c);
}

QuadPiece infeasible_piece(double lo, double hi) {
  QuadPiece p;
  p.lo = lo;
  p.hi = hi;
  p.feasible = false;
  return p;
}

// Roots of d(x) = da x^2 + db x + dc strictly inside (l, r), ascending.
// Near-zero discriminants count as tangency.
int interior_roots(double da, double db, double dc, double l, double r, double a_scale,
                   double out[2]) {
  int n = 0;
  auto keep = [&](double x) {
    if (x > l && x < r) out[n++] = x;
  };
  if (std::abs(da) <= kMergeTolerance * std::max(1.0, a_scale)) {
    if (db != 0.0) keep(-dc / db);
  } else {
    const double disc = db * db - 4.0 * da * dc;
    if (disc <= kDiscriminantCutoff * (db * db + 4.0 * std::abs(da * dc))) return 0;
    const double s = std::sqrt(disc);
    const double q = -0.5 * (db + std::copysign(s, db));
    double x1 = q / da;
    double x2 = dc / q;
    if (x1 > x2) std::swap(x1, x2);
    keep(x1);
    if (x2 != x1) keep(x2);
  }
  return n;
}

// Smallest x in [l, r] with p(x) = level, where p is strictly decreasing on
// [l, r], p(l) > level > p(r).
double descending_crossing(const QuadPiece& p, double level, double l, double r) {
  double x;
  if (p.a > 0.0) {
    const double cc = p.c - level;
    const double s = std::sqrt(std::max(0.0, p.b * p.b - 4.0 * p.a * cc));
    x = p.b > 0.0 ? (-p.b - s) / (2.0 * p.a) : (2.0 * cc) / (-p.b + s);
  } else {
    x = (level - p.c) / p.b;
  }
  return std::clamp(x, l, r);
}

// Piece k of f, or of m -> f(-m) when Mirror is set.
template <bool Mirror>
QuadPiece view(std::span<const QuadPiece> ps, std::size_t k) {
  if constexpr (!Mirror) {
    return ps[k];
  } else {
    QuadPiece p = ps[ps.size() - 1 - k];
    const double l = p.lo;
    p.lo = -p.hi;
    p.hi = -l;
    p.b = -p.b;
    return p;
  }
}

// Appends m -> inf { f(x) : x <= m - gap } for m in [lo + gap, hi] (in
// mirrored coordinates when Mirror is set): a running minimum from the left
// over [lo, hi - gap], shifted right by gap.
template <bool Mirror>
void shifted_running_min(const PiecewiseQuad& f, double gap, std::vector<QuadPiece>& out) {
  const auto ps = f.pieces();
  const double lo = Mirror ? -f.hi() : f.lo();
  const double end = (Mirror ? -f.lo() : f.hi()) - gap;
  double best = kInf;
  double best_x = lo;
  std::uint32_t best_label = 0;

  auto flat = [&](double l, double r) {
    if (!(r > l)) return;
    if (best == kInf) {
      out.push_back(infeasible_piece(l + gap, r + gap));
      return;
    }
    QuadPiece q;
    q.lo = l + gap;
    q.hi = r + gap;
    q.c = best;
    q.prov = {best_label, Derivation::flat, best_x, -1};
    out.push_back(q);
  };
  auto follow = [&](const QuadPiece& p, double l, double r) {
    if (!(r > l)) return;
    QuadPiece q = p;
    q.lo = l + gap;
    q.hi = r + gap;
    // p(m - gap)
    q.b = p.b - 2.0 * p.a * gap;
    q.c = p.a * gap * gap - p.b * gap + p.c;
    q.prov = {p.prov.label, Derivation::follow, 0.0, -1};
    out.push_back(q);
  };

  for (std::size_t k = 0; k < ps.size(); ++k) {
    const QuadPiece p = view<Mirror>(ps, k);
    if (p.lo >= end) break;
    const double l = p.lo;
    const double r = std::min(p.hi, end);
    if (!p.feasible) {
      flat(l, r);
      continue;
    }
    double vertex;
    if (p.a > 0.0) {
      vertex = -p.b / (2.0 * p.a);
    } else {
      vertex = p.b < 0.0 ? kInf : -kInf;
    }
    const double dec_end = std::clamp(vertex, l, r);
    if (dec_end > l) {
      const double at_l = p.eval(l);
      const double at_end = p.eval(dec_end);
      if (at_l <= best) {
        follow(p, l, dec_end);
      } else if (at_end >= best) {
        flat(l, dec_end);
      } else {
        const double x = descending_crossing(p, best, l, dec_end);
        flat(l, x);
        follow(p, x, dec_end);
      }
      if (at_end < best) {
        best = at_end;
        best_x = dec_end;
        best_label = p.prov.label;
      }
    }
    if (r > dec_end) {
      const double at_start = p.eval(dec_end);
      if (at_start < best) {
        best = at_start;
        best_x = dec_end;
        best_label = p.prov.label;
      }
      flat(dec_end, r);
    }
  }
}

template <bool Mirror>
void envelope(const PiecewiseQuad& f, double gap, std::vector<QuadPiece>& out) {
  if (!(gap >= 0.0) || !std::isfinite(gap)) {
    throw std::invalid_argument("envelope gap must be finite and non-negative");
  }
  if (f.empty()) throw std::invalid_argument("envelope of an empty function");
  if (gap >= f.hi() - f.lo()) {
    throw std::domain_error("envelope gap covers the whole domain; no feasible mean");
  }
  out.clear();
  const double lo = Mirror ? -f.hi() : f.lo();
  if (gap > 0.0) out.push_back(infeasible_piece(lo, lo + gap));
  shifted_running_min<Mirror>(f, gap, out);
  if constexpr (Mirror) {
    std::reverse(out.begin(), out.end());
    for (QuadPiece& p : out) {
      const double l = p.lo;
      p.lo = -p.hi;
      p.hi = -l;
      p.b = -p.b;
      if (p.prov.derivation == Derivation::flat) p.prov.anchor = -p.prov.anchor;
    }
  }
}

}  // namespace

double QuadPiece::argmin() const {
  if (a > 0.0) return std::clamp(-b / (2.0 * a), lo, hi);
  return b < 0.0 ? hi : lo;
}

void PiecewiseQuad::canonicalize() {
  if (pieces_.empty()) throw std::invalid_argument("piecewise function needs at least one piece");
  const double tiny = 1e-12 * (hi_ - lo_);
  const QuadPiece first = pieces_.front();
  std::size_t w = 0;
  for (std::size_t r = 0; r < pieces_.size(); ++r) {
    QuadPiece& p = pieces_[r];
    if (!p.feasible) {
      p.a = p.b = p.c = 0.0;
      p.prov = {};
    }
    if (w > 0) {
      QuadPiece& last = pieces_[w - 1];
      p.lo = last.hi;
      if (p.hi - p.lo <= tiny) {
        last.hi = std::max(last.hi, p.hi);
        continue;
      }
      if (mergeable(last, p)) {
        last.hi = p.hi;
        continue;
      }
    } else if (p.hi - p.lo <= tiny) {
      continue;
    }
    if (w != r) pieces_[w] = p;
    ++w;
  }
  if (w == 0) pieces_[w++] = first;
  pieces_.resize(w);
  pieces_.front().lo = lo_;
  pieces_.back().hi = hi_;
}

PiecewiseQuad make_canonical(std::vector<QuadPiece> pieces, double lo, double hi) {
  PiecewiseQuad f;
  f.lo_ = lo;
  f.hi_ = hi;
  f.pieces_ = std::move(pieces);
  f.canonicalize();
  return f;
}

PiecewiseQuad PiecewiseQuad::from_pieces(std::vector<QuadPiece> pieces) {
  if (pieces.empty()) throw std::invalid_argument("piecewise function needs at least one piece");
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    QuadPiece& p = pieces[k];
    if (!(p.lo < p.hi)) {
      throw std::invalid_argument("piece " + std::to_string(k) + " has lo >= hi");
    }
    if (k + 1 < pieces.size() && p.hi != pieces[k + 1].lo) {
      throw std::invalid_argument("pieces " + std::to_string(k) + " and " +
                                  std::to_string(k + 1) + " do not share a breakpoint");
    }
    if (p.feasible) {
      if (!std::isfinite(p.a) || !std::isfinite(p.b) || !std::isfinite(p.c)) {
        throw std::invalid_argument("piece " + std::to_string(k) + " has non-finite coefficients");
      }
      if (p.a < 0.0) {
        throw std::invalid_argument("piece " + std::to_string(k) + " is not convex (a < 0)");
      }
    }
  }
  const double lo = pieces.front().lo;
  const double hi = pieces.back().hi;
  return make_canonical(std::move(pieces), lo, hi);
}

PiecewiseQuad PiecewiseQuad::quadratic(double lo, double hi, double a, double b, double c) {
  QuadPiece p;
  p.lo = lo;
  p.hi = hi;
  p.a = a;
  p.b = b;
  p.c = c;
  return from_pieces({p});
}

PiecewiseQuad PiecewiseQuad::constant(double lo, double hi, double value) {
  return quadratic(lo, hi, 0.0, 0.0, value);
}

PiecewiseQuad PiecewiseQuad::infeasible(double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("empty domain");
  return from_pieces({infeasible_piece(lo, hi)});
}

std::size_t PiecewiseQuad::locate(double m) const {
  if (pieces_.empty() || m < lo_ || m > hi_) {
    throw std::out_of_range("point " + std::to_string(m) + " outside function domain");
  }
  auto it = std::lower_bound(pieces_.begin(), pieces_.end(), m,
                             [](const QuadPiece& p, double x) { return p.hi < x; });
  if (it == pieces_.end()) --it;
  return static_cast<std::size_t>(it - pieces_.begin());
}

double PiecewiseQuad::operator()(double m) const {
  const std::size_t k = locate(m);
  const QuadPiece& p = pieces_[k];
  double v = p.feasible ? p.eval(m) : kInf;
  if (m == p.hi && k + 1 < pieces_.size()) {
    const QuadPiece& q = pieces_[k + 1];
    if (q.feasible) v = std::min(v, q.eval(m));
  }
  return v;
}

bool PiecewiseQuad::all_infeasible() const {
  return std::none_of(pieces_.begin(), pieces_.end(), [](const QuadPiece& p) { return p.feasible; });
}

std::optional<std::pair<double, double>> PiecewiseQuad::feasible_hull() const {
  std::optional<std::pair<double, double>> hull;
  for (const QuadPiece& p : pieces_) {
    if (!p.feasible) continue;
    if (!hull) hull.emplace(p.lo, p.hi);
    hull->second = p.hi;
  }
  return hull;
}

PiecewiseQuad PiecewiseQuad::reflected() const {
  PiecewiseQuad g;
  g.lo_ = -hi_;
  g.hi_ = -lo_;
  g.pieces_.reserve(pieces_.size());
  for (auto it = pieces_.rbegin(); it != pieces_.rend(); ++it) {
    QuadPiece p = *it;
    p.lo = -it->hi;
    p.hi = -it->lo;
    p.b = -p.b;
    if (p.prov.derivation == Derivation::flat) p.prov.anchor = -p.prov.anchor;
    g.pieces_.push_back(std::move(p));
  }
  return g;
}

PiecewiseQuad add_point_loss(PiecewiseQuad f, double y) {
  for (QuadPiece& p : f.mutable_pieces()) {
    if (!p.feasible) continue;
    p.a += 1.0;
    p.b -= 2.0 * y;
    p.c += y * y;
  }
  return f;
}

PiecewiseQuad add_constant(PiecewiseQuad f, double k) {
  for (QuadPiece& p : f.mutable_pieces()) {
    if (p.feasible) p.c += k;
  }
  return f;
}

void pointwise_min_into(const PiecewiseQuad& f, const PiecewiseQuad& g, PiecewiseQuad& out) {
  if (f.lo() != g.lo() || f.hi() != g.hi()) {
    throw std::invalid_argument("pointwise_min: domain mismatch");
  }
  const auto fp = f.pieces();
  const auto gp = g.pieces();
  out.lo_ = f.lo();
  out.hi_ = f.hi();
  std::vector<QuadPiece>& dst = out.pieces_;
  dst.clear();

  auto push = [&dst](const QuadPiece& src, double l, double r) {
    if (!(r > l)) return;
    dst.push_back(src);
    dst.back().lo = l;
    dst.back().hi = r;
  };

  std::size_t i = 0;
  std::size_t j = 0;
  double x = f.lo();
  while (i < fp.size() && j < gp.size()) {
    const QuadPiece& p = fp[i];
    const QuadPiece& q = gp[j];
    const double r = std::min(p.hi, q.hi);
    if (!q.feasible) {
      push(p, x, r);
    } else if (!p.feasible) {
      push(q, x, r);
    } else {
      double roots[2];
      const int n = interior_roots(p.a - q.a, p.b - q.b, p.c - q.c, x, r,
                                   std::max(p.a, q.a), roots);
      double cuts[4] = {x, 0.0, 0.0, 0.0};
      for (int k = 0; k < n; ++k) cuts[k + 1] = roots[k];
      cuts[n + 1] = r;
      for (int k = 0; k <= n; ++k) {
        const double mid = 0.5 * (cuts[k] + cuts[k + 1]);
        push(p.eval(mid) <= q.eval(mid) ? p : q, cuts[k], cuts[k + 1]);
      }
    }
    x = r;
    if (p.hi <= r) ++i;
    if (q.hi <= r) ++j;
  }
  out.canonicalize();
}

PiecewiseQuad pointwise_min(const PiecewiseQuad& f, const PiecewiseQuad& g) {
  PiecewiseQuad out;
  pointwise_min_into(f, g, out);
  return out;
}

void min_leq_envelope_into(const PiecewiseQuad& f, double gap, PiecewiseQuad& out) {
  envelope<false>(f, gap, out.pieces_);
  out.lo_ = f.lo();
  out.hi_ = f.hi();
  out.canonicalize();
}

void min_geq_envelope_into(const PiecewiseQuad& f, double gap, PiecewiseQuad& out) {
  envelope<true>(f, gap, out.pieces_);
  out.lo_ = f.lo();
  out.hi_ = f.hi();
  out.canonicalize();
}

PiecewiseQuad min_leq_envelope(const PiecewiseQuad& f, double gap) {
  PiecewiseQuad out;
  min_leq_envelope_into(f, gap, out);
  return out;
}

PiecewiseQuad min_geq_envelope(const PiecewiseQuad& f, double gap) {
  PiecewiseQuad out;
  min_geq_envelope_into(f, gap, out);
  return out;
}

Minimum global_min(const PiecewiseQuad& f) {
  Minimum best{0.0, kInf, 0};
  const auto pieces = f.pieces();
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const QuadPiece& p = pieces[k];
    if (!p.feasible) continue;
    const double x = p.argmin();
    const double v = p.eval(x);
    if (v < best.value) best = {x, v, k};
  }
  if (best.value == kInf) throw std::domain_error("global_min: function has no feasible point");
  return best;
}

}  // namespace gccd::pwq
