#include <doctest.h>

#include <cmath>

#include "mgv/resilience.hpp"
#include "mgv/rng.hpp"
#include "oracles.hpp"

using namespace mgv;

namespace {

TimeSeries series_of(std::vector<double> v, double t0 = 0.0, double step = 1.0) {
    TimeSeries s;
    s.t0 = t0;
    s.step = step;
    s.v = std::move(v);
    return s;
}

TimeSeries grid(double t0, double step, size_t n) {
    TimeSeries s;
    s.t0 = t0;
    s.step = step;
    s.v.assign(n, 0.0);
    return s;
}

FunctionalitySeries as_functionality(TimeSeries s) {
    FunctionalitySeries f;
    f.series = std::move(s);
    return f;
}

}  // namespace

TEST_CASE("moving average basics") {
    // constant series is unchanged
    TimeSeries c = series_of(std::vector<double>(50, 3.25));
    const TimeSeries cs = moving_average(c, 7.0);
    for (double v : cs.v) CHECK(v == doctest::Approx(3.25));

    // unit impulse spreads into a plateau of 1/k
    TimeSeries imp = series_of(std::vector<double>(51, 0.0));
    imp.v[25] = 1.0;
    const TimeSeries is = moving_average(imp, 6.0);  // half-width 3, k = 7
    CHECK(is.v[25] == doctest::Approx(1.0 / 7));
    CHECK(is.v[23] == doctest::Approx(1.0 / 7));
    CHECK(is.v[28] == doctest::Approx(1.0 / 7));
    CHECK(is.v[29] == doctest::Approx(0.0));

    // a linear ramp survives everywhere thanks to symmetric truncation
    TimeSeries ramp = series_of({});
    for (int i = 0; i < 40; ++i) ramp.v.push_back(2.0 * i + 5.0);
    const TimeSeries rs = moving_average(ramp, 10.0);
    for (size_t i = 0; i < rs.size(); ++i) CHECK(rs.v[i] == doctest::Approx(ramp.v[i]));

    CHECK_THROWS_AS(moving_average(ramp, 0.5), ArgumentError);  // window < step
}

TEST_CASE("functionality ratio modes") {
    TimeSeries base = series_of(std::vector<double>(100, 2.0));
    TimeSeries attack = base;

    // identical series: F = 1 everywhere
    FunctionalitySeries f =
        functionality(attack, base, FunctionalityMode::kNoncompensatory, 5.0);
    for (double v : f.series.v) CHECK(v == doctest::Approx(1.0));

    // attack half the baseline on a window
    for (size_t i = 40; i < 60; ++i) attack.v[i] = 1.0;
    f = functionality(attack, base, FunctionalityMode::kNoncompensatory, 1.0);
    CHECK(f.series.v[50] == doctest::Approx(0.5));

    // overshoot clamps at 1 only in the noncompensatory mode
    TimeSeries over = base;
    for (size_t i = 40; i < 60; ++i) over.v[i] = 3.0;
    f = functionality(over, base, FunctionalityMode::kNoncompensatory, 1.0);
    CHECK(f.series.v[50] == doctest::Approx(1.0));
    f = functionality(over, base, FunctionalityMode::kCompensatory, 1.0);
    CHECK(f.series.v[50] == doctest::Approx(1.5));

    // zero baseline names the timestamp
    TimeSeries zero_base = base;
    zero_base.v[70] = 0.0;
    try {
        functionality(attack, zero_base, FunctionalityMode::kCompensatory, 1.0);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("t=70") != std::string::npos);
    }
}

TEST_CASE("auc loss rectangle arithmetic") {
    TimeSeries base = series_of(std::vector<double>(101, 1.0));
    TimeSeries attack = base;
    for (size_t i = 40; i < 60; ++i) attack.v[i] = 0.5;

    AucOptions opts;
    opts.smooth_window_s = 1.0;  // no smoothing

    // identical curves
    CHECK(auc_loss(base, base, FunctionalityMode::kCompensatory, AucInterval::kFull, opts) ==
          doctest::Approx(0.0));

    // 20 s dip of depth 0.5 over a 100 s mission: 10% compensatory loss
    const double full = auc_loss(base, attack, FunctionalityMode::kCompensatory,
                                 AucInterval::kFull, opts);
    CHECK(full == doctest::Approx(0.10).epsilon(0.01));

    // deviation interval concentrates the same absolute loss
    const double dev = auc_loss(base, attack, FunctionalityMode::kNoncompensatory,
                                AucInterval::kDeviation, opts);
    CHECK(dev > full);
}

TEST_CASE("compensatory auc loss never exceeds noncompensatory") {
    Rng rng(1001, "auc_property");
    AucOptions opts;
    opts.smooth_window_s = 5.0;
    for (int trial = 0; trial < 100; ++trial) {
        TimeSeries base = grid(0.0, 1.0, 200);
        TimeSeries attack = base;
        for (size_t i = 0; i < base.size(); ++i) {
            base.v[i] = rng.uniform(0.5, 2.0);
            attack.v[i] = rng.uniform(0.3, 2.5);
        }
        const double comp = auc_loss(base, attack, FunctionalityMode::kCompensatory,
                                     AucInterval::kFull, opts);
        const double noncomp = auc_loss(base, attack, FunctionalityMode::kNoncompensatory,
                                        AucInterval::kFull, opts);
        CHECK(comp <= noncomp + 1e-12);
        CHECK(noncomp >= -1e-12);  // the min never beats the baseline
    }
}

TEST_CASE("closed-form model: pre-onset, decay value, recovery limit") {
    const ModelParams p{0.008, 0.048, 307.0, 408.0};
    CHECK(model_value(p, 1.0, 100.0) == doctest::Approx(1.0));
    // F(408) = exp(-0.008 * 101)
    CHECK(model_value(p, 1.0, 408.0) == doctest::Approx(std::exp(-0.808)).epsilon(1e-9));
    CHECK(model_value(p, 1.0, 1e7) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("closed form matches the RK4 oracle to 1e-6") {
    Rng rng(2024, "ode_oracle");
    const TimeSeries g = grid(0.0, 0.5, 1601);  // [0, 800]
    for (int trial = 0; trial < 10; ++trial) {
        ModelParams p;
        p.malware_rate = rng.uniform(1e-4, 0.2);
        p.bonware_rate = rng.uniform(1e-4, 0.2);
        p.onset_s = rng.uniform(50.0, 350.0);
        p.switch_s = p.onset_s + rng.uniform(20.0, 400.0);

        const TimeSeries closed = simulate_model(p, 1.0, g);
        const TimeSeries numeric = oracles::rk4_model(p, 1.0, g, 0.01);
        double max_err = 0.0;
        for (size_t i = 0; i < g.size(); ++i)
            max_err = std::max(max_err, std::abs(closed.v[i] - numeric.v[i]));
        CHECK(max_err <= 1e-6);
    }
}

TEST_CASE("fit recovers noiseless parameters exactly") {
    const ModelParams truth{0.008, 0.048, 307.0, 408.0};
    const TimeSeries f = simulate_model(truth, 1.0, grid(0.0, 1.0, 801));
    const FitResult fit = fit_model(as_functionality(f));

    REQUIRE_FALSE(fit.degenerate);
    CHECK(std::abs(fit.params.malware_rate - truth.malware_rate) <= 1e-4);
    CHECK(std::abs(fit.params.bonware_rate - truth.bonware_rate) <= 1e-4);
    CHECK(std::abs(fit.params.onset_s - truth.onset_s) <= 1.0);
    CHECK(std::abs(fit.params.switch_s - truth.switch_s) <= 1.0);
    CHECK(fit.rmse <= 1e-6);
}

TEST_CASE("fit-simulate identity across the parameter box (noiseless)") {
    Rng rng(77, "fit_box");
    for (int trial = 0; trial < 8; ++trial) {
        ModelParams truth;
        truth.malware_rate = std::exp(rng.uniform(std::log(1e-4), std::log(0.2)));
        truth.bonware_rate = std::exp(rng.uniform(std::log(1e-4), std::log(0.2)));
        truth.onset_s = std::floor(rng.uniform(60.0, 350.0));
        truth.switch_s = truth.onset_s + std::floor(rng.uniform(20.0, 400.0));

        const TimeSeries f = simulate_model(truth, 1.0, grid(0.0, 1.0, 801));
        const FitResult fit = fit_model(as_functionality(f));
        REQUIRE_FALSE(fit.degenerate);
        CHECK(std::abs(fit.params.onset_s - truth.onset_s) <= 1.0);
        CHECK(std::abs(fit.params.switch_s - truth.switch_s) <= 1.0);
        CHECK(std::abs(fit.params.malware_rate - truth.malware_rate) <= 1e-4);
        CHECK(std::abs(fit.params.bonware_rate - truth.bonware_rate) <= 1e-4);
    }
}

TEST_CASE("flat series takes the degenerate path") {
    const TimeSeries f = series_of(std::vector<double>(100, 1.0));
    const FitResult fit = fit_model(as_functionality(f));
    CHECK(fit.degenerate);
    CHECK(fit.params.malware_rate == 0.0);
    CHECK_FALSE(fit.onset_s.has_value());
    CHECK_FALSE(fit.switch_s.has_value());
}

TEST_CASE("serial and parallel fit kernels agree bitwise") {
    const ModelParams truth{0.01, 0.05, 200.0, 320.0};
    TimeSeries f = simulate_model(truth, 1.0, grid(0.0, 1.0, 701));
    Rng rng(5, "kernel_noise");
    for (double& v : f.v) v += 0.02 * rng.gaussian();

    std::vector<size_t> onsets, switches;
    for (size_t i = 150; i <= 240; ++i) onsets.push_back(i);
    for (size_t i = 280; i <= 360; ++i) switches.push_back(i);

    const FitOptions opts;
    const auto serial = fit_grid_serial(f, 1.0, onsets, switches, opts);
    const auto parallel = fit_grid_parallel(f, 1.0, onsets, switches, opts);
    REQUIRE(serial.size() == parallel.size());
    for (size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].onset_idx == parallel[i].onset_idx);
        CHECK(serial[i].switch_idx == parallel[i].switch_idx);
        CHECK(serial[i].malware_rate == parallel[i].malware_rate);
        CHECK(serial[i].bonware_rate == parallel[i].bonware_rate);
        CHECK(serial[i].sse == parallel[i].sse);
    }
}

TEST_CASE("resilience score basics and the symbolic-integral oracle") {
    FunctionalitySeries ones = as_functionality(series_of(std::vector<double>(101, 1.0)));
    CHECK(resilience_score(ones, 0.0, 100.0) == doctest::Approx(1.0));
    FunctionalitySeries halves = as_functionality(series_of(std::vector<double>(101, 0.5)));
    CHECK(resilience_score(halves, 0.0, 100.0) == doctest::Approx(0.5));
    CHECK_THROWS_AS(resilience_score(ones, 50.0, 50.0), ArgumentError);

    // trapezoid on a fine grid against the exact piecewise integral
    const ModelParams p{0.008, 0.048, 307.0, 408.0};
    const TimeSeries fine = simulate_model(p, 1.0, grid(0.0, 0.01, 80001));
    const double r = resilience_score(as_functionality(fine), 0.0, 800.0);
    const double exact = oracles::analytic_integral(p, 1.0, 0.0, 800.0) / 800.0;
    CHECK(std::abs(r - exact) <= 1e-9);
}

TEST_CASE("model resilience is monotone in each impact rate") {
    const TimeSeries g = grid(0.0, 1.0, 801);
    std::vector<double> m_rates, b_rates;
    for (int i = 0; i < 10; ++i) {
        m_rates.push_back(0.002 + 0.004 * i);
        b_rates.push_back(0.005 + 0.01 * i);
    }

    // decreasing in the malware rate along every bonware row
    for (double b : b_rates) {
        double prev = 2.0;
        for (double m : m_rates) {
            const ModelParams p{m, b, 307.0, 408.0};
            const double r =
                resilience_score(as_functionality(simulate_model(p, 1.0, g)), 0.0, 800.0);
            CHECK(r < prev);
            prev = r;
        }
    }
    // increasing in the bonware rate whenever malware is active
    for (double m : m_rates) {
        double prev = -1.0;
        for (double b : b_rates) {
            const ModelParams p{m, b, 307.0, 408.0};
            const double r =
                resilience_score(as_functionality(simulate_model(p, 1.0, g)), 0.0, 800.0);
            CHECK(r > prev);
            prev = r;
        }
    }
}

TEST_CASE("multi-objective scores") {
    // all objectives nominal
    const MultiObjectiveScore all_nominal = multi_objective({1.0, 1.0}, {1.0, 1.0});
    CHECK(all_nominal.normalized == doctest::Approx(1.0));

    // the worked two-objective example
    const MultiObjectiveScore two = multi_objective({0.6, 0.8}, {1.0, 1.0});
    CHECK(two.rms == doctest::Approx(1.0));
    CHECK(two.normalized == doctest::Approx(0.70710678118).epsilon(1e-10));

    // single objective reduces to R / F_N
    const MultiObjectiveScore one = multi_objective({0.42}, {1.0});
    CHECK(one.normalized == doctest::Approx(0.42));

    CHECK_THROWS_AS(multi_objective({}, {}), ArgumentError);
    CHECK_THROWS_AS(multi_objective({0.5}, {0.0}), ArgumentError);

    // normalized score stays in [0, 1] for valid inputs
    Rng rng(31337, "score_fuzz");
    for (int trial = 0; trial < 2000; ++trial) {
        const size_t n = 1 + rng.below(6);
        std::vector<double> r_vec, n_vec;
        for (size_t i = 0; i < n; ++i) {
            const double nominal = rng.uniform(0.1, 3.0);
            n_vec.push_back(nominal);
            r_vec.push_back(rng.uniform(0.0, nominal));
        }
        const MultiObjectiveScore s = multi_objective(r_vec, n_vec);
        CHECK(s.normalized >= 0.0);
        CHECK(s.normalized <= 1.0 + 1e-12);
    }
}
