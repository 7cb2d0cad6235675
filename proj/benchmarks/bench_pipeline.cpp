#include "bsdiag/bsdiag.hpp"

#include <benchmark/benchmark.h>

using namespace bsdiag;

namespace {

Dataset simulated(std::size_t n) {
    const std::vector<std::string> names{"x1"};
    const ExprAST model = parse_model("b1 + b2*exp(b3*x1)", names, 3);
    const Vector beta{1.0, 2.0, 0.5};
    Rng rng(2024);
    DenseMatrix x(n, 1);
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform(0.0, 4.0);
        y[i] = eval_value(model, x.row(i), beta) + sn_draw(SNParams{0.5, 0.0, 2.0}, rng);
    }
    return {std::move(y), names, std::move(x)};
}

void BM_FitMle(benchmark::State& state) {
    const Dataset data = simulated(static_cast<std::size_t>(state.range(0)));
    const ExprAST model = parse_model("b1 + b2*exp(b3*x1)", data.covariate_names, 3);
    for (auto _ : state) benchmark::DoNotOptimize(fit_mle(model, data));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FitMle)->RangeMultiplier(4)->Range(50, 800)->Complexity();

void BM_InfluenceAllSchemes(benchmark::State& state) {
    const Dataset data = simulated(static_cast<std::size_t>(state.range(0)));
    const ExprAST model = parse_model("b1 + b2*exp(b3*x1)", data.covariate_names, 3);
    const FitResult fit = fit_mle(model, data);
    const ObservedInfo info = observed_info_at_hat(fit);
    const std::vector<PerturbationScheme> schemes{PerturbationScheme::case_weights(),
                                                  PerturbationScheme::response(sample_sd(data.y)),
                                                  PerturbationScheme::explanatory(0, sample_sd(data.x.column(0)))};
    for (auto _ : state)
        for (const auto& s : schemes)
            benchmark::DoNotOptimize(influence_report(delta_for_scheme(model, data, fit, s), info));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_InfluenceAllSchemes)->RangeMultiplier(2)->Range(25, 200)->Complexity();

void BM_GeneralizedLeverage(benchmark::State& state) {
    const Dataset data = simulated(static_cast<std::size_t>(state.range(0)));
    const ExprAST model = parse_model("b1 + b2*exp(b3*x1)", data.covariate_names, 3);
    const FitResult fit = fit_mle(model, data);
    for (auto _ : state) benchmark::DoNotOptimize(generalized_leverage(fit));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GeneralizedLeverage)->RangeMultiplier(2)->Range(25, 400)->Complexity();

void BM_JacobiEigen(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(7);
    DenseMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.normal();
    for (auto _ : state) benchmark::DoNotOptimize(jacobi_sym_eig(a));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_JacobiEigen)->RangeMultiplier(2)->Range(8, 128)->Complexity(benchmark::oNCubed);

}  // namespace

BENCHMARK_MAIN();
