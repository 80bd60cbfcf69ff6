#include "riskshare/qdescent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "riskshare/error.hpp"

namespace riskshare {
namespace {

constexpr std::size_t kTrialShareIterations = 2000;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

// gamma0 regrouped by aggregate atom.
struct Problem {
  const JointLaw* gamma0;
  DiscreteMeasure m0;
  std::vector<std::size_t> owner;  // gamma0 atom -> m0 atom
  BallConfig ball;
};

Problem make_problem(const JointLaw& gamma0, const BallConfig& ball) {
  ball.validate(gamma0.dim());
  for (const auto& a : gamma0.atoms()) {
    for (const auto& y : a.x) {
      if (!ball.contains(y)) throw Error(Errc::OutsideBall, "allocation has a component outside the ball");
    }
  }
  Problem pb{&gamma0, sum_pushforward(gamma0), {}, ball};
  for (const auto& a : gamma0.atoms()) {
    Point s(gamma0.dim(), 0.0);
    for (const auto& y : a.x) {
      for (std::size_t j = 0; j < s.size(); ++j) s[j] += y[j];
    }
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pb.m0.size(); ++k) {
      const double d = distance(pb.m0[k].x, s);
      if (d < best_dist) {
        best_dist = d;
        best = k;
      }
    }
    pb.owner.push_back(best);
  }
  return pb;
}

struct Evaluation {
  double j = 0.0;
  std::vector<std::vector<Point>> shares;  // per m0 atom
  std::vector<Point> prices;
};

Evaluation evaluate(const StrictlyConvexProfile& psi, const Problem& pb, const std::vector<Point>* warm,
                    std::size_t max_share_iterations = ShareOptions{}.max_iterations) {
  const JointLaw& g0 = *pb.gamma0;
  if (psi.agents() != g0.agents() || psi.dim() != g0.dim()) {
    throw Error(Errc::DimensionMismatch, "profile does not match allocation");
  }
  Evaluation ev;
  double own = 0.0;
  for (const auto& a : g0.atoms()) {
    double c = 0.0;
    for (std::size_t i = 0; i < a.x.size(); ++i) c += psi.value(i, a.x[i]);
    own += a.w * c;
  }
  double shared = 0.0;
  for (std::size_t k = 0; k < pb.m0.size(); ++k) {
    ShareOptions opt;
    if (warm != nullptr) opt.initial_price = (*warm)[k];
    opt.max_iterations = max_share_iterations;
    const SharingPoint sp = share_point(psi, pb.m0[k].x, pb.ball, opt);
    double c = 0.0;
    for (std::size_t i = 0; i < sp.shares.size(); ++i) c += psi.value(i, sp.shares[i]);
    shared += pb.m0[k].w * c;
    ev.shares.push_back(sp.shares);
    ev.prices.push_back(sp.price);
  }
  ev.j = own - shared;
  return ev;
}

std::vector<SignedAtom> merge_signed(std::vector<SignedAtom> atoms) {
  std::sort(atoms.begin(), atoms.end(), [](const SignedAtom& l, const SignedAtom& r) { return l.x < r.x; });
  std::vector<SignedAtom> out;
  for (auto& a : atoms) {
    bool merged = false;
    for (std::size_t u = out.size(); u-- > 0;) {
      if (out[u].x[0] < a.x[0] - kMergeDistance) break;
      if (distance(out[u].x, a.x) <= kMergeDistance) {
        out[u].w += a.w;
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back(std::move(a));
  }
  std::erase_if(out, [](const SignedAtom& a) { return std::abs(a.w) <= 1e-15; });
  return out;
}

std::vector<std::vector<SignedAtom>> discrepancies(const Problem& pb, const Evaluation& ev) {
  const JointLaw& g0 = *pb.gamma0;
  std::vector<std::vector<SignedAtom>> out(g0.agents());
  for (std::size_t i = 0; i < g0.agents(); ++i) {
    std::vector<SignedAtom> raw;
    for (const auto& a : g0.atoms()) raw.push_back({a.x[i], a.w});
    for (std::size_t k = 0; k < pb.m0.size(); ++k) raw.push_back({ev.shares[k][i], -pb.m0[k].w});
    out[i] = merge_signed(std::move(raw));
  }
  return out;
}

JointLaw law_of(const Problem& pb, const Evaluation& ev) {
  std::vector<TupleAtom> atoms;
  for (std::size_t k = 0; k < pb.m0.size(); ++k) atoms.push_back({ev.shares[k], pb.m0[k].w});
  return validate_joint_law(std::move(atoms));
}

// Convex test function: u . x (affine) or max(0, u . (x - z)) (hinge).
struct TestFunction {
  bool affine = false;
  Point u;
  Point z;

  [[nodiscard]] double operator()(std::span<const double> x) const {
    if (affine) return dot(u, x);
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += u[j] * (x[j] - z[j]);
    return std::max(0.0, s);
  }
};

std::vector<Point> directions(std::size_t dim) {
  std::vector<Point> dirs;
  for (std::size_t j = 0; j < dim; ++j) {
    Point e(dim, 0.0);
    e[j] = 1.0;
    dirs.push_back(e);
    for (std::size_t k = j + 1; k < dim; ++k) {
      for (double sign : {1.0, -1.0}) {
        Point v(dim, 0.0);
        v[j] = 1.0 / std::sqrt(2.0);
        v[k] = sign / std::sqrt(2.0);
        dirs.push_back(v);
      }
    }
  }
  const std::size_t n = dirs.size();
  for (std::size_t k = 0; k < n; ++k) {
    Point v = dirs[k];
    for (double& c : v) c = -c;
    dirs.push_back(v);
  }
  return dirs;
}

struct Cut {
  TestFunction g;
  double slope = 0.0;  // integral of g against the discrepancy
};

// The `count` test functions with the most negative integral against d.
std::vector<Cut> select_cuts(const std::vector<SignedAtom>& d, std::size_t dim, std::size_t count) {
  std::vector<Cut> all;
  const auto integral = [&](const TestFunction& g) {
    double s = 0.0;
    for (const auto& a : d) s += a.w * g(a.x);
    return s;
  };
  for (const Point& u : directions(dim)) {
    TestFunction aff{true, u, {}};
    all.push_back({aff, integral(aff)});
    for (const auto& a : d) {
      TestFunction h{false, u, a.x};
      all.push_back({h, integral(h)});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const Cut& l, const Cut& r) { return l.slope < r.slope; });
  std::vector<Cut> out;
  for (const auto& c : all) {
    if (out.size() == count || c.slope >= -1e-14) break;
    out.push_back(c);
  }
  return out;
}

// Pieces of the upper envelope that are maximal on a subinterval of [lo, hi]
// longer than rounding noise.
std::vector<AffinePiece> envelope_1d(std::vector<AffinePiece> pieces, double lo, double hi) {
  std::sort(pieces.begin(), pieces.end(), [](const AffinePiece& l, const AffinePiece& r) {
    return l.slope[0] < r.slope[0] || (l.slope[0] == r.slope[0] && l.intercept < r.intercept);
  });
  // x where line m (steeper) overtakes line l.
  const auto cross = [](const AffinePiece& l, const AffinePiece& m) {
    return (l.intercept - m.intercept) / (m.slope[0] - l.slope[0]);
  };
  std::vector<AffinePiece> hull;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    if (k + 1 < pieces.size() && pieces[k + 1].slope[0] == pieces[k].slope[0]) continue;
    const AffinePiece& line = pieces[k];
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], line) <= cross(hull[hull.size() - 2], hull.back())) {
      hull.pop_back();
    }
    hull.push_back(line);
  }
  const double tiny = 1e-12 * (1.0 + std::abs(lo) + std::abs(hi));
  std::vector<AffinePiece> keep;
  for (std::size_t j = 0; j < hull.size(); ++j) {
    const double left = j == 0 ? -std::numeric_limits<double>::infinity() : cross(hull[j - 1], hull[j]);
    const double right = j + 1 == hull.size() ? std::numeric_limits<double>::infinity() : cross(hull[j], hull[j + 1]);
    if (std::min(right, hi) - std::max(left, lo) > tiny) keep.push_back(hull[j]);
  }
  if (keep.empty()) {
    const double mid = 0.5 * (lo + hi);
    std::size_t best = 0;
    for (std::size_t j = 1; j < hull.size(); ++j) {
      if (hull[j].slope[0] * mid + hull[j].intercept > hull[best].slope[0] * mid + hull[best].intercept) best = j;
    }
    keep.push_back(hull[best]);
  }
  return keep;
}

std::vector<AffinePiece> active_at(const std::vector<AffinePiece>& pieces, const std::vector<Point>& probes) {
  std::vector<char> used(pieces.size(), 0);
  for (const auto& x : probes) {
    std::size_t best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      const double v = dot(pieces[k].slope, x) + pieces[k].intercept;
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    used[best] = 1;
  }
  std::vector<AffinePiece> keep;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    if (used[k] != 0) keep.push_back(pieces[k]);
  }
  return keep;
}

std::vector<Point> ball_probes(const BallConfig& ball, std::size_t dim) {
  std::vector<Point> out;
  std::vector<int> idx(dim, -2);
  const double spacing = ball.radius / (2.0 * std::sqrt(static_cast<double>(dim)));
  for (;;) {
    Point x(dim);
    for (std::size_t j = 0; j < dim; ++j) x[j] = ball.center_coord(j) + idx[j] * spacing;
    out.push_back(std::move(x));
    std::size_t j = 0;
    while (j < dim && ++idx[j] > 2) {
      idx[j] = -2;
      ++j;
    }
    if (j == dim) break;
  }
  return out;
}

StrictlyConvexProfile apply_cuts(const StrictlyConvexProfile& psi, const std::vector<std::vector<Cut>>& cuts,
                                 double step, const Problem& pb, const Evaluation& ev, std::size_t max_pieces) {
  const std::size_t dim = psi.dim();
  std::vector<AgentProfile> agents(psi.all().begin(), psi.all().end());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    auto& pieces = agents[i].pieces;
    for (const Cut& c : cuts[i]) {
      if (c.g.affine) {
        for (auto& pc : pieces) {
          for (std::size_t j = 0; j < dim; ++j) pc.slope[j] += step * c.g.u[j];
        }
      } else {
        const std::size_t n = pieces.size();
        for (std::size_t k = 0; k < n; ++k) {
          AffinePiece q = pieces[k];
          for (std::size_t j = 0; j < dim; ++j) q.slope[j] += step * c.g.u[j];
          q.intercept -= step * dot(c.g.u, c.g.z);
          pieces.push_back(std::move(q));
        }
      }
    }
    if (dim == 1) {
      const double c = pb.ball.center_coord(0);
      pieces = envelope_1d(pieces, c - pb.ball.radius, c + pb.ball.radius);
    } else if (pieces.size() > max_pieces) {
      std::vector<Point> probes = ball_probes(pb.ball, dim);
      for (const auto& a : pb.gamma0->atoms()) probes.push_back(a.x[i]);
      for (const auto& s : ev.shares) probes.push_back(s[i]);
      pieces = active_at(pieces, probes);
    }
  }
  return StrictlyConvexProfile(dim, std::move(agents));
}

}  // namespace

double j_value(const StrictlyConvexProfile& psi, const JointLaw& gamma0, const BallConfig& ball) {
  return evaluate(psi, make_problem(gamma0, ball), nullptr).j;
}

QState minimize_q(const JointLaw& gamma0, const StrictlyConvexProfile& start, const BallConfig& ball,
                  const QDescentConfig& config) {
  const Problem pb = make_problem(gamma0, ball);
  StrictlyConvexProfile psi = start;
  Evaluation ev = evaluate(psi, pb, nullptr);
  QState st{psi, 0.0, {}, {}, 0, false, {}};
  st.history.push_back(ev.j);
  const double target = config.target.value_or(0.0);
  // Beyond this a cut moves marginal costs past every price reachable in the ball.
  double curvature = 0.0;
  for (std::size_t i = 0; i < start.agents(); ++i) curvature = std::max(curvature, start.floor_hessian(i).norm());
  double reach = ball.radius;
  for (std::size_t j = 0; j < gamma0.dim(); ++j) reach += std::abs(ball.center_coord(j));
  const double step_cap = 4.0 * curvature * reach;

  std::size_t it = 0;
  for (; it < config.max_iters; ++it) {
    if (ev.j <= config.j_tolerance) break;
    const auto d = discrepancies(pb, ev);
    std::vector<std::vector<Cut>> cuts(gamma0.agents());
    double slope = 0.0;
    for (std::size_t i = 0; i < gamma0.agents(); ++i) {
      cuts[i] = select_cuts(d[i], gamma0.dim(), std::max<std::size_t>(config.cuts_per_iter, 1));
      for (const Cut& c : cuts[i]) slope += c.slope;
    }
    if (slope >= -1e-13) break;  // stationary: gamma_psi dominates gamma0 agent-wise

    double gap = ev.j - target;
    if (gap <= 1e-3 * ev.j) gap = ev.j;
    double step = std::min(gap / -slope, step_cap);

    const StrictlyConvexProfile base = psi;
    const Evaluation base_ev = ev;
    bool accepted = false;
    for (std::size_t h = 0; h <= config.max_halvings && !accepted; ++h, step *= 0.5) {
      try {
        StrictlyConvexProfile trial = apply_cuts(base, cuts, step, pb, base_ev, config.max_pieces);
        Evaluation tev = evaluate(trial, pb, &ev.prices, kTrialShareIterations);
        if (tev.j <= ev.j + 0.5 * step * slope) {
          accepted = true;
          psi = std::move(trial);
          ev = std::move(tev);
          if (h == 0) {
            // Expand while it keeps paying off.
            for (int grow = 0; grow < 8; ++grow) {
              step *= 2.0;
              StrictlyConvexProfile more = apply_cuts(base, cuts, step, pb, base_ev, config.max_pieces);
              Evaluation mev = evaluate(more, pb, &ev.prices, kTrialShareIterations);
              if (!(mev.j < ev.j)) break;
              psi = std::move(more);
              ev = std::move(mev);
            }
          }
        }
      } catch (const Error& e) {
        if (e.code() != Errc::NoConvergence && e.code() != Errc::NumericalBreakdown) throw;
      }
    }
    if (!accepted) break;
    st.history.push_back(ev.j);
  }

  st.profile = psi;
  st.j = ev.j;
  st.iterations = it;
  st.iteration_cap_reached = it == config.max_iters && ev.j > config.j_tolerance;
  st.gamma_psi = law_of(pb, ev);
  st.marginal_discrepancies = discrepancies(pb, ev);
  return st;
}

QState minimize_q(const JointLaw& gamma0, std::span<const double> eps, const BallConfig& ball,
                  const QDescentConfig& config) {
  return minimize_q(gamma0, StrictlyConvexProfile::quadratic(gamma0.dim(), eps), ball, config);
}

}  // namespace riskshare
