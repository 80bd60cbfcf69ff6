#include <benchmark/benchmark.h>

#include <random>

#include "riskshare/convex_order.hpp"
#include "riskshare/improve.hpp"
#include "riskshare/infconv.hpp"
#include "riskshare/maxcorr.hpp"
#include "riskshare/qdescent.hpp"

using namespace riskshare;

namespace {

DiscreteMeasure random_measure(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::uniform_real_distribution<double> u(-2.0, 2.0), w(0.1, 1.0);
  std::vector<Atom> atoms(n);
  double total = 0.0;
  for (auto& a : atoms) {
    a.x.resize(dim);
    for (double& v : a.x) v = u(rng);
    a.w = w(rng);
    total += a.w;
  }
  for (auto& a : atoms) a.w /= total;
  return validate_measure(std::move(atoms));
}

JointLaw random_allocation(std::mt19937_64& rng, std::size_t atoms) {
  std::uniform_int_distribution<int> u(-2, 2);
  std::vector<TupleAtom> raw(atoms);
  for (auto& a : raw) {
    a.x = {{static_cast<double>(u(rng))}, {static_cast<double>(u(rng))}};
    a.w = 1.0 / static_cast<double>(atoms);
  }
  return validate_joint_law(std::move(raw));
}

BallConfig ball(double r) {
  BallConfig b;
  b.radius = r;
  return b;
}

}  // namespace

static void BM_Dominates1d(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto mu = random_measure(rng, state.range(0), 1);
  const auto nu = random_measure(rng, state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(dominates_1d(mu, nu));
}
BENCHMARK(BM_Dominates1d)->Arg(10)->Arg(100)->Arg(1000);

static void BM_DominatesLp(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto mu = random_measure(rng, state.range(0), 2);
  const auto nu = random_measure(rng, state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(dominates_md(mu, nu));
}
BENCHMARK(BM_DominatesLp)->Arg(5)->Arg(10)->Arg(20);

static void BM_MaxCorrelationLp(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto xi = random_measure(rng, state.range(0), 2);
  const auto mu = random_measure(rng, state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(max_correlation(xi, mu));
}
BENCHMARK(BM_MaxCorrelationLp)->Arg(5)->Arg(15)->Arg(25);

static void BM_SharePoint(benchmark::State& state) {
  std::vector<AgentProfile> agents(3);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    agents[i].eps = 0.5 + static_cast<double>(i);
    agents[i].pieces = {{{1.0, -0.5}, 0.0}, {{-0.5, 1.0}, 0.2}};
  }
  const StrictlyConvexProfile psi(2, agents);
  const Point x{0.7, -0.3};
  for (auto _ : state) benchmark::DoNotOptimize(share_point(psi, x, ball(3.0)));
}
BENCHMARK(BM_SharePoint);

static void BM_EfficiencyStatistic(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const auto g0 = random_allocation(rng, 4);
  const std::vector<double> eps{1.0, 1.0};
  const double h = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(efficiency_statistic(g0, eps, h, ball(5.0)));
}
BENCHMARK(BM_EfficiencyStatistic)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_QDescent(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const auto g0 = random_allocation(rng, 3);
  const std::vector<double> eps{1.0, 1.0};
  QDescentConfig cfg;
  cfg.max_iters = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(minimize_q(g0, eps, ball(5.0), cfg));
}
BENCHMARK(BM_QDescent)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
