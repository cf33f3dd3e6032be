#include <tbmeta/endemic.hpp>
#include <tbmeta/integrate.hpp>
#include <tbmeta/ngm.hpp>
#include <tbmeta/sweep.hpp>

#include <benchmark/benchmark.h>

using namespace tbmeta;

namespace {

DegreeDistribution network(benchmark::State& state) {
  return build_truncated_power_law(3.0, 3, 3 + static_cast<int>(state.range(0)));
}

void BM_RhsUncorrelated(benchmark::State& state) {
  const auto d = network(state);
  Params p = Params::table1();
  p.beta = 1e-3;
  const ModelRhs rhs(p, d, ModelOptions{IncidenceKind::MassAction, true});
  const Vector y = perturbed_dfe(p, d).flat();
  Vector out;
  for (auto _ : state) {
    rhs.evaluate(y, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_RhsUncorrelated)->Arg(10)->Arg(97)->Arg(400);

void BM_Jacobian(benchmark::State& state) {
  const auto d = network(state);
  const ModelRhs rhs(Params::table1(), d, {});
  const Vector y = perturbed_dfe(Params::table1(), d).flat();
  for (auto _ : state) benchmark::DoNotOptimize(rhs.jacobian(y));
}
BENCHMARK(BM_Jacobian)->Arg(10)->Arg(97);

void BM_R0Numeric(benchmark::State& state) {
  const auto d = network(state);
  for (auto _ : state) benchmark::DoNotOptimize(r0_numeric(Params::table1(), d, IncidenceKind::StandardIncidence));
}
BENCHMARK(BM_R0Numeric)->Arg(10)->Arg(97);

void BM_R0MassStructured(benchmark::State& state) {
  const auto d = network(state);
  Params p = Params::table1();
  p.beta = 1e-4;
  for (auto _ : state) benchmark::DoNotOptimize(r0_mass_structured(p, d));
}
BENCHMARK(BM_R0MassStructured)->Arg(10)->Arg(97);

void BM_ModalCoefficients(benchmark::State& state) {
  const Params p = Params::table1();
  for (auto _ : state) benchmark::DoNotOptimize(modal_coefficients(p));
}
BENCHMARK(BM_ModalCoefficients);

void BM_EndemicPhi(benchmark::State& state) {
  const auto d = network(state);
  Params p = Params::table1();
  p.beta = 1e-3;
  const EndemicSystem sys(p, d);
  const Vector z = Vector::Constant(sys.size(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(sys.phi(z));
}
BENCHMARK(BM_EndemicPhi)->Arg(10)->Arg(97)->Arg(400);

void BM_SolveEndemic(benchmark::State& state) {
  const auto d = network(state);
  Params p = Params::table1();
  p.beta = 1e-3;
  const EndemicSystem sys(p, d);
  const Vector init = Vector::Constant(sys.size(), p.beta * p.lambda / p.mu * 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(solve_endemic(sys, init));
}
BENCHMARK(BM_SolveEndemic)->Arg(10)->Arg(97)->Unit(benchmark::kMillisecond);

void BM_IntegrateYear(benchmark::State& state) {
  const auto d = network(state);
  Params p = Params::table1();
  p.beta = 1e-3;
  const ModelRhs rhs(p, d, ModelOptions{IncidenceKind::MassAction, true});
  const auto x0 = perturbed_dfe(p, d);
  for (auto _ : state) benchmark::DoNotOptimize(integrate(rhs, x0, 1.0, 1.0));
}
BENCHMARK(BM_IntegrateYear)->Arg(10)->Arg(97)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
