#include "riskshare/infconv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include "riskshare/error.hpp"

namespace riskshare {
namespace {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

Vec to_vec(std::span<const double> x) {
  Vec v(static_cast<Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) v[static_cast<Index>(j)] = x[j];
  return v;
}

Point to_point(const Vec& v) { return Point(v.data(), v.data() + v.size()); }

Vec center_of(const BallConfig& ball, std::size_t dim) {
  Vec c = Vec::Zero(static_cast<Index>(dim));
  for (std::size_t j = 0; j < dim; ++j) c[static_cast<Index>(j)] = ball.center_coord(j);
  return c;
}

// Minimizes 1/2 y^T H y - q.y + max_k (a_k.y + b_k) over all of R^d with a
// primal active-set method on the epigraph form
//   min 1/2 y^T H y - q.y + t   s.t.  a_k.y + b_k <= t.
// The working set always contains at least one piece, which pins t.
Vec solve_polyhedral(const Eigen::LLT<Mat>& h, const Mat& a, const Vec& b, const Vec& q) {
  const Index pieces = a.rows();
  const Vec hq = h.solve(q);
  if (pieces == 1) return hq - h.solve(a.row(0).transpose());

  const Mat ha = h.solve(a.transpose());  // column k = H^-1 a_k
  Vec y = hq;
  Index first = 0;
  double t = (a * y + b).maxCoeff(&first);
  std::vector<Index> working{first};

  const std::size_t cap = 100 + 20 * static_cast<std::size_t>(pieces);
  for (std::size_t iter = 0; iter < cap; ++iter) {
    const auto k = static_cast<Index>(working.size());
    Mat kkt = Mat::Zero(k + 1, k + 1);
    Vec rhs(k + 1);
    for (Index r = 0; r < k; ++r) {
      for (Index c = 0; c < k; ++c) kkt(r, c) = a.row(working[static_cast<std::size_t>(r)]).dot(ha.col(working[static_cast<std::size_t>(c)]));
      kkt(r, k) = 1.0;
      kkt(k, r) = 1.0;
      rhs[r] = a.row(working[static_cast<std::size_t>(r)]).dot(hq) + b[working[static_cast<std::size_t>(r)]];
    }
    rhs[k] = 1.0;
    const Vec sol = kkt.completeOrthogonalDecomposition().solve(rhs);

    Vec y_star = hq;
    for (Index r = 0; r < k; ++r) y_star.noalias() -= sol[r] * ha.col(working[static_cast<std::size_t>(r)]);
    const double t_star = sol[k];
    const Vec step_y = y_star - y;
    const double step_t = t_star - t;
    const double scale = 1.0 + y.cwiseAbs().maxCoeff() + std::abs(t);

    if (step_y.cwiseAbs().maxCoeff() <= 1e-13 * scale && std::abs(step_t) <= 1e-13 * scale) {
      Index worst = 0;
      const double lambda_min = sol.head(k).minCoeff(&worst);
      if (lambda_min >= -1e-12) return y_star;
      working.erase(working.begin() + worst);
      continue;
    }

    double alpha = 1.0;
    Index blocking = -1;
    for (Index j = 0; j < pieces; ++j) {
      if (std::find(working.begin(), working.end(), j) != working.end()) continue;
      const double rate = a.row(j).dot(step_y) - step_t;
      if (rate <= 1e-15 * scale) continue;
      const double slack = std::max(0.0, t - (a.row(j).dot(y) + b[j]));
      const double reach = slack / rate;
      if (reach < alpha) {
        alpha = reach;
        blocking = j;
      }
    }
    y.noalias() += alpha * step_y;
    t += alpha * step_t;
    if (blocking >= 0) working.push_back(blocking);
  }
  throw Error(Errc::NoConvergence, "active-set iteration cap reached in agent best response");
}

}  // namespace

StrictlyConvexProfile::StrictlyConvexProfile(std::size_t dim, std::vector<AgentProfile> agents)
    : dim_(dim), agents_(std::move(agents)) {
  if (dim_ == 0) throw Error(Errc::DimensionMismatch, "profile dimension must be >= 1");
  if (agents_.empty()) throw Error(Errc::EmptyInput, "profile has no agents");
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    auto& ag = agents_[i];
    const std::string who = "agent " + std::to_string(i);
    if (!(ag.eps > 0.0) || !std::isfinite(ag.eps)) {
      throw Error(Errc::ParameterOutOfRange, who + ": eps must be positive and finite");
    }
    Mat h;
    if (ag.floor_matrix) {
      if (ag.floor_matrix->rows() != static_cast<Index>(dim_) || ag.floor_matrix->cols() != static_cast<Index>(dim_)) {
        throw Error(Errc::DimensionMismatch, who + ": floor matrix has the wrong shape");
      }
      require_spd(*ag.floor_matrix, "floor matrix");
      h = *ag.floor_matrix;
    } else {
      h = ag.eps * Mat::Identity(static_cast<Index>(dim_), static_cast<Index>(dim_));
    }
    for (const auto& piece : ag.pieces) {
      if (piece.slope.size() != dim_) {
        throw Error(Errc::DimensionMismatch, who + ": affine piece slope has the wrong dimension");
      }
      if (!std::isfinite(piece.intercept) ||
          !std::all_of(piece.slope.begin(), piece.slope.end(), [](double v) { return std::isfinite(v); })) {
        throw Error(Errc::NonFinite, who + ": affine piece is not finite");
      }
    }
    if (ag.pieces.empty()) ag.pieces.push_back({Point(dim_, 0.0), 0.0});
    std::sort(ag.pieces.begin(), ag.pieces.end(), [](const AffinePiece& l, const AffinePiece& r) {
      return std::tie(l.slope, l.intercept) < std::tie(r.slope, r.intercept);
    });
    ag.pieces.erase(std::unique(ag.pieces.begin(), ag.pieces.end(),
                                [](const AffinePiece& l, const AffinePiece& r) {
                                  return l.slope == r.slope && l.intercept == r.intercept;
                                }),
                    ag.pieces.end());
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    min_eigen_.push_back(es.eigenvalues().minCoeff());
    hessians_.push_back(std::move(h));
  }
}

StrictlyConvexProfile StrictlyConvexProfile::quadratic(std::size_t dim, std::span<const double> eps) {
  std::vector<AgentProfile> agents;
  for (double e : eps) agents.push_back({e, std::nullopt, {}});
  return StrictlyConvexProfile(dim, std::move(agents));
}

double StrictlyConvexProfile::floor(std::size_t i, std::span<const double> y) const {
  const Vec v = to_vec(y);
  return 0.5 * v.dot(hessians_[i] * v);
}

double StrictlyConvexProfile::perturbation(std::size_t i, std::span<const double> y) const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& piece : agents_[i].pieces) {
    double v = piece.intercept;
    for (std::size_t j = 0; j < dim_; ++j) v += piece.slope[j] * y[j];
    best = std::max(best, v);
  }
  return best;
}

double StrictlyConvexProfile::modulus(std::size_t i, double t) const { return 0.5 * min_eigen_[i] * t * t; }

bool StrictlyConvexProfile::pure_quadratic(std::size_t i) const {
  const auto& pieces = agents_[i].pieces;
  if (pieces.size() != 1 || pieces.front().intercept != 0.0) return false;
  return std::all_of(pieces.front().slope.begin(), pieces.front().slope.end(), [](double v) { return v == 0.0; });
}

bool StrictlyConvexProfile::pure_quadratic() const {
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (!pure_quadratic(i)) return false;
  }
  return true;
}

AgentResponse best_response(const StrictlyConvexProfile& psi, std::size_t agent, const Vec& price,
                            const BallConfig& ball) {
  const std::size_t dim = psi.dim();
  const auto d = static_cast<Index>(dim);
  const Mat& h = psi.floor_hessian(agent);
  const Vec c = center_of(ball, dim);
  const double radius = ball.radius;
  const auto& pieces = psi.agent(agent).pieces;

  Mat a(static_cast<Index>(pieces.size()), d);
  Vec b(static_cast<Index>(pieces.size()));
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    for (std::size_t j = 0; j < dim; ++j) a(static_cast<Index>(k), static_cast<Index>(j)) = pieces[k].slope[j];
    b[static_cast<Index>(k)] = pieces[k].intercept;
  }

  // Ball multiplier mu >= 0 enters as the extra term mu/2 |y - c|^2.
  const auto solve_at = [&](double mu) {
    const Mat hm = h + mu * Mat::Identity(d, d);
    const Eigen::LLT<Mat> llt(hm);
    return solve_polyhedral(llt, a, b, price + mu * c);
  };

  Vec y = solve_at(0.0);
  if ((y - c).norm() <= radius) return {y, 0.0};

  const bool isotropic = !psi.agent(agent).floor_matrix.has_value();
  if (isotropic && psi.pure_quadratic(agent)) {
    // Exact projection of price / eps onto the ball.
    const Vec dir = y - c;
    Vec proj = c + radius * dir / dir.norm();
    const double mu = (price - psi.agent(agent).eps * proj).norm() / radius;
    return {std::move(proj), mu};
  }

  // Root of 1/R - 1/|y(mu) - c|, nearly linear in mu: bracket, then Illinois.
  const auto excess = [&](const Vec& v) { return 1.0 / radius - 1.0 / std::max((v - c).norm(), 1e-300); };
  double lo = 0.0;
  double f_lo = excess(y);
  // Exact for an isotropic floor with a fixed active piece.
  const double top_eig = Eigen::SelfAdjointEigenSolver<Mat>(h, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  double hi = top_eig * ((y - c).norm() / radius - 1.0) * (1.0 + 1e-9) + 1e-300;
  Vec y_hi = solve_at(hi);
  double f_hi = excess(y_hi);
  while (f_hi > 0.0) {
    lo = hi;
    f_lo = f_hi;
    hi = std::max(4.0 * hi, 1e-6 * top_eig);
    if (hi > 1e18) throw Error(Errc::NoConvergence, "ball multiplier bracket diverged");
    y_hi = solve_at(hi);
    f_hi = excess(y_hi);
  }
  int side = 0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
    double mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
    Vec y_mid = solve_at(mid);
    const double f_mid = excess(y_mid);
    if (std::abs(f_mid) <= 1e-13 / radius) return {std::move(y_mid), mid};
    if (f_mid > 0.0) {
      lo = mid;
      f_lo = f_mid;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    } else {
      hi = mid;
      f_hi = f_mid;
      y_hi = std::move(y_mid);
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
  }
  return {std::move(y_hi), hi};
}

namespace {

// Derivative of an agent's best response with respect to the price on the
// region fixed by its active pieces and, if binding, the ball: with Z a basis
// of directions keeping the active pieces tied and the radius fixed,
// dy/dp = Z (Z^T (H + mu I) Z)^-1 Z^T.
Mat response_jacobian(const StrictlyConvexProfile& psi, std::size_t agent, const AgentResponse& r,
                      const BallConfig& ball) {
  const auto d = static_cast<Index>(psi.dim());
  const auto& pieces = psi.agent(agent).pieces;

  std::vector<Vec> normals;
  if (pieces.size() > 1) {
    std::vector<double> v(pieces.size());
    double top = -std::numeric_limits<double>::infinity();
    std::size_t lead = 0;
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      v[k] = pieces[k].intercept;
      for (Index j = 0; j < d; ++j) v[k] += pieces[k].slope[static_cast<std::size_t>(j)] * r.y[j];
      if (v[k] > top) {
        top = v[k];
        lead = k;
      }
    }
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      if (k == lead || v[k] < top - 1e-9 * (1.0 + std::abs(top))) continue;
      Vec n(d);
      for (Index j = 0; j < d; ++j) {
        n[j] = pieces[k].slope[static_cast<std::size_t>(j)] - pieces[lead].slope[static_cast<std::size_t>(j)];
      }
      if (n.norm() > 1e-12) normals.push_back(n);
    }
  }
  if (r.multiplier > 0.0) normals.push_back(r.y - center_of(ball, psi.dim()));

  const Mat h = psi.floor_hessian(agent) + r.multiplier * Mat::Identity(d, d);
  if (normals.empty()) return h.inverse();

  Mat n(static_cast<Index>(normals.size()), d);
  for (std::size_t k = 0; k < normals.size(); ++k) n.row(static_cast<Index>(k)) = normals[k].transpose();
  const Eigen::JacobiSVD<Mat> svd(n, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  Index rank = 0;
  for (Index k = 0; k < sv.size(); ++k) {
    if (sv[k] > 1e-10 * sv[0]) ++rank;
  }
  if (rank >= d) return Mat::Zero(d, d);
  const Mat z = svd.matrixV().rightCols(d - rank);
  const Mat reduced = z.transpose() * h * z;
  return z * reduced.ldlt().solve(z.transpose());
}

}  // namespace

void require_spd(const Mat& s, const char* what) {
  if (s.rows() != s.cols() || s.rows() == 0) {
    throw Error(Errc::NotPositiveDefinite, std::string(what) + " is not square");
  }
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(Errc::NotPositiveDefinite, std::string(what) + " is not symmetric");
  }
  const Eigen::LDLT<Mat> ldlt(s);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-12 * scale) {
    throw Error(Errc::NotPositiveDefinite, std::string(what) + " is not positive definite");
  }
}

std::vector<Mat> quadratic_sharing_matrix(std::span<const Mat> s) {
  if (s.empty()) throw Error(Errc::EmptyInput, "no matrices given");
  const Index d = s.front().rows();
  Mat total = Mat::Zero(d, d);
  for (const auto& si : s) {
    if (si.rows() != d || si.cols() != d) throw Error(Errc::DimensionMismatch, "matrices differ in shape");
    require_spd(si, "S_i");
    total += si;
  }
  const Eigen::PartialPivLU<Mat> lu(total);
  if (!(lu.rcond() > 1e-12)) throw Error(Errc::SingularSum, "sum of the S_i is numerically singular");
  const Mat inv = lu.inverse();
  std::vector<Mat> t;
  t.reserve(s.size());
  for (const auto& si : s) t.push_back(si * inv);
  return t;
}

SharingPoint share_point(const StrictlyConvexProfile& psi, const Point& x, const BallConfig& ball,
                         const ShareOptions& options) {
  const std::size_t dim = psi.dim();
  const std::size_t p = psi.agents();
  if (x.size() != dim) throw Error(Errc::DimensionMismatch, "aggregate point has the wrong dimension");
  ball.validate(dim);
  const Vec xv = to_vec(x);
  const Vec c = center_of(ball, dim);
  const double pd = static_cast<double>(p);
  if ((xv - pd * c).norm() > pd * ball.radius * (1.0 + 1e-12) + 1e-12) {
    throw Error(Errc::XOutsideDomain, "aggregate point lies outside p * B");
  }

  std::vector<Mat> inverse_floors;
  inverse_floors.reserve(p);
  Mat inverse_sum = Mat::Zero(static_cast<Index>(dim), static_cast<Index>(dim));
  for (std::size_t i = 0; i < p; ++i) {
    inverse_floors.push_back(psi.floor_hessian(i).inverse());
    inverse_sum += inverse_floors.back();
  }
  const Vec quadratic_price = inverse_sum.partialPivLu().solve(xv);

  SharingPoint out;
  out.x = x;

  if (options.allow_closed_form && psi.pure_quadratic()) {
    const auto t = quadratic_sharing_matrix(inverse_floors);
    std::vector<Point> shares;
    bool inside = true;
    for (const auto& ti : t) {
      shares.push_back(to_point(ti * xv));
      inside = inside && ball.contains(shares.back(), 1e-12);
    }
    if (inside) {
      out.shares = std::move(shares);
      out.price = to_point(quadratic_price);
      out.multipliers.assign(p, 0.0);
      Vec sum = Vec::Zero(static_cast<Index>(dim));
      for (const auto& y : out.shares) sum += to_vec(y);
      out.residual = (sum - xv).norm();
      out.closed_form = true;
      return out;
    }
  }

  struct Eval {
    std::vector<AgentResponse> responses;
    Vec gradient;
    double dual = 0.0;
  };
  const auto evaluate = [&](const Vec& price) {
    Eval e;
    e.gradient = xv;
    e.dual = price.dot(xv);
    for (std::size_t i = 0; i < p; ++i) {
      e.responses.push_back(best_response(psi, i, price, ball));
      const Vec& y = e.responses.back().y;
      e.gradient -= y;
      e.dual += psi.value(i, std::span<const double>(y.data(), static_cast<std::size_t>(y.size()))) - price.dot(y);
    }
    return e;
  };

  Vec price = options.initial_price ? to_vec(*options.initial_price) : quadratic_price;
  if (price.size() != static_cast<Index>(dim)) throw Error(Errc::DimensionMismatch, "initial price has the wrong dimension");
  Eval cur = evaluate(price);
  const double target = 1e-8 * (1.0 + xv.norm());
  double step = 1.0;
  std::size_t iter = 0;
  for (; cur.gradient.norm() > target; ++iter) {
    if (iter >= options.max_iterations) {
      throw Error(Errc::NoConvergence, "dual ascent did not reach the residual target within " +
                                           std::to_string(options.max_iterations) + " iterations");
    }
    // Minimum-norm Newton step on the piecewise-affine response map; kept only
    // if it lowers the residual without lowering the dual. Residual left in the
    // null space (agents held on kinks or the ball) goes to the gradient step.
    Mat jac = Mat::Zero(static_cast<Index>(dim), static_cast<Index>(dim));
    for (std::size_t i = 0; i < p; ++i) jac += response_jacobian(psi, i, cur.responses[i], ball);
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(jac);
    cod.setThreshold(1e-10);
    const Vec newton = cod.solve(cur.gradient);
    const double res = cur.gradient.norm();
    bool accepted = false;
    if (newton.allFinite() && newton.norm() > 0.0) {
      double alpha = 1.0;
      for (int halvings = 0; halvings < 8 && !accepted; ++halvings, alpha *= 0.5) {
        Eval trial = evaluate(price + alpha * newton);
        const double slack = 1e-14 * (1.0 + std::abs(cur.dual));
        if (trial.gradient.norm() < (1.0 - 1e-4 * alpha) * res && trial.dual >= cur.dual - slack) {
          price += alpha * newton;
          cur = std::move(trial);
          accepted = true;
        }
      }
    }
    if (accepted) continue;

    const double g2 = cur.gradient.squaredNorm();
    for (int halvings = 0; halvings < 80; ++halvings) {
      const Vec trial_price = price + step * cur.gradient;
      Eval trial = evaluate(trial_price);
      if (trial.dual >= cur.dual + 1e-4 * step * g2) {
        price = trial_price;
        cur = std::move(trial);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      throw Error(Errc::NoConvergence, "dual ascent line search stalled");
    }
    step *= 2.0;
  }

  out.iterations = iter;
  out.price = to_point(price);
  for (auto& r : cur.responses) {
    out.shares.push_back(to_point(r.y));
    out.multipliers.push_back(r.multiplier);
  }
  out.residual = cur.gradient.norm();
  return out;
}

double inf_convolution_value(const StrictlyConvexProfile& psi, const Point& x, const BallConfig& ball) {
  const SharingPoint sp = share_point(psi, x, ball);
  double v = 0.0;
  for (std::size_t i = 0; i < psi.agents(); ++i) v += psi.value(i, sp.shares[i]);
  return v;
}

JointLaw sharing_law(const StrictlyConvexProfile& psi, const DiscreteMeasure& m0, const BallConfig& ball) {
  if (m0.dim() != psi.dim()) throw Error(Errc::DimensionMismatch, "aggregate law and profile differ in dimension");
  std::vector<TupleAtom> atoms;
  atoms.reserve(m0.size());
  for (const auto& a : m0.atoms()) {
    SharingPoint sp = share_point(psi, a.x, ball);
    atoms.push_back({std::move(sp.shares), a.w});
  }
  return validate_joint_law(std::move(atoms));
}

CounterexampleDiagnostics counterexample_family(int n, double eps) {
  if (n < 1) throw Error(Errc::ParameterOutOfRange, "n must be a positive integer");
  if (!(eps > 0.0 && eps < 1.0)) throw Error(Errc::ParameterOutOfRange, "eps must lie in (0, 1)");
  CounterexampleDiagnostics diag;
  diag.n = n;
  diag.eps = eps;
  const double nn = static_cast<double>(n);
  const double rn = std::sqrt(nn);

  diag.s1 << 0.5, 1.0 / (8.0 * rn), 1.0 / (8.0 * rn), 1.0 / (2.0 * nn);
  diag.s2 << 0.5, -1.0 / (8.0 * rn), -1.0 / (8.0 * rn), 1.0 / (2.0 * nn);
  {
    const std::vector<Mat> s{diag.s1, diag.s2};
    diag.t1 = quadratic_sharing_matrix(s)[0];
  }
  diag.t1_norm = Eigen::JacobiSVD<Mat>(Mat(diag.t1)).singularValues()[0];

  const double r1 = std::sqrt(1.0 - eps);
  const double rne = std::sqrt(nn - eps);
  diag.s1_eps << 1.0, r1, r1, 1.0;
  diag.s2_eps << 1.0, -r1, -r1, 1.0;
  diag.s1_prime << 1.0, rne, rne, nn;
  diag.s2_prime << 1.0, -rne, -rne, nn;
  {
    const std::vector<Mat> s{diag.s1_eps, diag.s2_eps};
    const auto m = quadratic_sharing_matrix(s);
    diag.m1 = m[0];
    diag.m2 = m[1];
  }
  {
    const std::vector<Mat> s{diag.s1_prime, diag.s2_prime};
    const auto m = quadratic_sharing_matrix(s);
    diag.m1_prime = m[0];
    diag.m2_prime = m[1];
  }
  diag.det_m1_sum = (diag.m1 + diag.m1_prime).determinant();
  return diag;
}

}  // namespace riskshare
