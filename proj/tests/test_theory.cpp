#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "reprocs/datagen.hpp"
#include "reprocs/linalg.hpp"
#include "reprocs/theory.hpp"
#include "reprocs/tracker.hpp"

using namespace reprocs;
using theory::TheoryParams;

// Mechanical re-transcription of every bound formula in extended precision.
// Used only as a test oracle; structured differently from the library code
// on purpose (flat argument lists, long double throughout).
namespace oracle {

long double k_of_zeta(long double zeta, long double c) {
    const long double x = std::log(0.6L * c * zeta) / std::log(0.6L);
    const long double r = std::round(x);
    return (std::abs(x - r) < 1e-9L) ? r : std::ceil(x);
}

long double xi0(long double zeta, long double c, long double gn) {
    return std::sqrt(c) * gn + 1.06L * std::sqrt(zeta);
}

long double alpha_add(long double n, long double J, long double c, long double gn,
                      long double gs, long double zeta, long double lm, long double v) {
    const long double K = k_of_zeta(zeta, c);
    const long double m1 = std::min(std::pow(v, 4.0L * K) * gn * gn * gn * gn,
                                    gs * gs * gs * gs);
    const long double m2 = 16.0L / (c * c);
    const long double q = 0.186L * gn * gn + 0.0034L * gn + 2.3L;
    const long double m3 = 4.0L * q * q;
    const long double peak = std::max(m1, std::max(m2, m3));
    const long double v0 =
        (std::log(6.0L * K * J) + 11.0L * std::log(n)) *
        (8.0L * 576.0L / ((zeta * lm) * (zeta * lm))) * peak;
    return std::max(1.0L, std::ceil(v0));
}

long double alpha_del(long double n, long double J, long double r, long double gs,
                      long double zeta, long double lm, long double theta,
                      long double phi) {
    const long double base = std::sqrt(r) * gs + phi * std::sqrt(zeta);
    const long double b7 = base * base;
    const long double peak = std::max(4.2L * 4.2L, 4.0L * b7 * b7);
    const long double v0 = (std::log(6.0L * theta * J) + 11.0L * std::log(n)) *
                           (800.0L / ((zeta * lm) * (zeta * lm))) * peak;
    return std::max(1.0L, std::ceil(v0));
}

std::vector<long double> zeta_series(long double r, long double c, long double zeta,
                                     long double f, long double kappa, long double gp,
                                     long double phi, int K) {
    const long double zs = r * zeta;
    const long double zs2 = zs * zs;
    const long double root = std::sqrt(1.0L - zs2);
    const long double C = 2.0L * kappa * phi / root + phi;
    const long double Cp = phi * phi + 2.0L * phi / root + 1.0L + phi + kappa * phi / root +
                           kappa * phi * phi / root;
    const long double Ct = phi * phi + kappa * phi * phi / root;
    std::vector<long double> s{1.0L};
    for (int k = 1; k <= K; ++k) {
        const long double prev = s.back();
        const long double b =
            C * kappa * gp * prev + Ct * kappa * kappa * gp * prev * prev + Cp * f * zs2;
        const long double den = 1.0L - zs2 - zs2 * f - 0.25L * c * zeta - b;
        s.push_back((b + 0.125L * c * zeta) / den);
    }
    return s;
}

struct IncDec {
    long double inc;
    long double dec;
};

IncDec f_inc_dec(long double g, long double h, long double r, long double c,
                 long double zeta, long double f, long double ke, long double phi) {
    const long double rc = r + c;
    const long double r2z2 = r * r * zeta * zeta;
    const long double inc =
        rc * zeta *
        (3.0L * ke * phi * g +
         (ke * phi + ke * (1.0L + 2.0L * phi) * r2z2 / std::sqrt(1.0L - r2z2)) * h +
         ((r * r / rc) * zeta + 4.0L * r * zeta * ke * phi +
          2.0L * rc * zeta * (1.0L + ke * ke) * phi * phi) * f +
         0.2L / rc);
    const long double dec = 1.0L - h - 0.2L * zeta - r2z2 * f - r2z2 - inc;
    return {inc, dec};
}

} // namespace oracle

namespace {

TheoryParams feasible_params(int r, int c, double f, double zeta_scale, double gamma_star,
                             double gamma_new) {
    TheoryParams p;
    p.r = r;
    p.c = c;
    p.r0 = r - c;
    p.gamma_star = gamma_star;
    p.gamma_new = gamma_new;
    p.lambda_minus = 1.0;
    p.lambda_plus = f;
    const double rc = static_cast<double>(r) + c;
    const double bound = std::min({1e-4 / (rc * rc), 1.5e-4 / (rc * rc * f),
                                   1.0 / (rc * rc * rc * gamma_star * gamma_star)});
    p.zeta = zeta_scale * bound;
    return p;
}

} // namespace

TEST_CASE("k_of_zeta exact and high-precision cases") {
    CHECK(theory::k_of_zeta(1.0, 1) == 1);
    CHECK(theory::k_of_zeta(0.6, 1) == 2); // log(0.36)/log(0.6) is exactly 2
    CHECK(theory::k_of_zeta(8.26e-7, 1) == 29);
    CHECK_THROWS_AS(theory::k_of_zeta(2.0, 1), RegimeError);
    CHECK_THROWS_AS(theory::k_of_zeta(0.0, 1), RegimeError);
}

TEST_CASE("k_of_zeta is non-increasing in zeta") {
    int prev = 1 << 30;
    for (double z = 1e-9; z < 1.0; z *= 3.7) {
        const int k = theory::k_of_zeta(z, 1);
        CHECK(k <= prev);
        prev = k;
    }
}

TEST_CASE("xi0 arithmetic") {
    CHECK(theory::xi0(0.0, 1, 0.0) == 0.0);
    CHECK(theory::xi0(0.01, 4, 1.0) == doctest::Approx(2.106).epsilon(1e-12));
    // linear in gamma_new at fixed zeta and c
    const double base = theory::xi0(0.25, 2, 1.0) - 1.06 * 0.5;
    CHECK(theory::xi0(0.25, 2, 3.0) - 1.06 * 0.5 == doctest::Approx(3.0 * base).epsilon(1e-12));
}

TEST_CASE("alpha_add and alpha_del decrease as zeta grows") {
    TheoryParams p = feasible_params(10, 1, 100.0, 1.0, 5.0, 1.0);
    TheoryParams tighter = p;
    tighter.zeta = p.zeta / 10.0;
    CHECK(theory::alpha_add(tighter) > theory::alpha_add(p));
    CHECK(theory::alpha_del(tighter) > theory::alpha_del(p));
    CHECK(theory::alpha_add(p) >= 1.0);
    CHECK(theory::alpha_del(p) >= 1.0);
}

TEST_CASE("alpha_del frozen value from the extended-precision oracle") {
    TheoryParams p;
    p.n = 256;
    p.J = 2;
    p.r = 10;
    p.c = 1;
    p.gamma_star = 5.0;
    p.zeta = 1e-6;
    p.lambda_minus = 1.0;
    p.lambda_plus = 1.0;
    p.vartheta_max = 3;
    const double got = theory::alpha_del(p);
    const long double expect =
        oracle::alpha_del(256.0L, 2.0L, 10.0L, 5.0L, 1e-6L, 1.0L, 3.0L, 1.1735L);
    CHECK(got == doctest::Approx(static_cast<double>(expect)).epsilon(1e-12));
    // magnitude pin so a wholesale formula mix-up cannot slip through
    CHECK(got > 1e21);
    CHECK(got < 1e23);
}

TEST_CASE("zeta series starts at one and decays under feasible parameters") {
    TheoryParams p = feasible_params(10, 1, 100.0, 1.0, 5.0, 1.0);
    const int K = theory::k_of_zeta(p.zeta, p.c);
    auto s = theory::zeta_plus_series(p, K);
    REQUIRE(static_cast<int>(s.size()) == K + 1);
    CHECK(s[0] == 1.0);
    for (int k = 1; k <= K; ++k) {
        CHECK(s[static_cast<size_t>(k)] <=
              std::pow(0.6, k) + 0.4 * p.c * p.zeta + 1e-12);
        if (k >= 2) CHECK(s[static_cast<size_t>(k)] <= s[static_cast<size_t>(k - 1)] + 1e-12);
    }
}

TEST_CASE("zeta series reports the failing step in a bad regime") {
    TheoryParams p;
    p.r = 100;
    p.c = 1;
    p.zeta = 0.05; // r*zeta way out of range
    p.lambda_minus = 1.0;
    p.lambda_plus = 1.0;
    CHECK_THROWS_WITH_AS(theory::zeta_plus_series(p, 3), doctest::Contains("k=1"), RegimeError);
}

TEST_CASE("f_inc/f_dec monotonicity and the h=1 breakdown") {
    TheoryParams p = feasible_params(10, 1, 100.0, 1.0, 5.0, 1.0);
    double prev_inc = -1.0, prev_dec = 2.0;
    for (double g = 1.0; g <= 16.0; g *= 2.0) {
        auto cb = theory::f_inc_dec(g, 0.01, p);
        CHECK(cb.f_inc >= prev_inc);
        CHECK(cb.f_dec <= prev_dec);
        prev_inc = cb.f_inc;
        prev_dec = cb.f_dec;
    }
    prev_inc = -1.0;
    prev_dec = 2.0;
    for (double h = 0.0; h < 0.9; h += 0.2) {
        auto cb = theory::f_inc_dec(2.0, h, p);
        CHECK(cb.f_inc >= prev_inc);
        CHECK(cb.f_dec <= prev_dec);
        prev_inc = cb.f_inc;
        prev_dec = cb.f_dec;
    }
    CHECK_THROWS_AS(theory::f_inc_dec(1.0, 1.0, p), RegimeError);
}

TEST_CASE("dual implementations agree to 1e-12 relative on 1000 draws") {
    std::mt19937 gen(2024);
    std::uniform_int_distribution<int> rdist(2, 48);
    std::uniform_int_distribution<int> cdist(1, 4);
    std::uniform_real_distribution<double> fdist(0.0, 5.0);
    std::uniform_real_distribution<double> udist(0.05, 1.0);
    std::uniform_real_distribution<double> gsdist(1.0, 50.0);
    std::uniform_real_distribution<double> gndist(0.1, 2.0);

    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int c = cdist(gen);
        const int r = std::max(c + 1, rdist(gen));
        const double f = std::pow(10.0, fdist(gen));
        const double gs = gsdist(gen);
        const double gn = gndist(gen);
        TheoryParams p = feasible_params(r, c, f, udist(gen), gs, gn);
        p.n = 128 + trial % 2048;
        p.J = 1 + trial % 7;
        p.vartheta_max = 1 + trial % 5;

        auto rel = [](double a, long double b) {
            const double bb = static_cast<double>(b);
            return std::abs(a - bb) <= 1e-12 * std::max(std::abs(a), std::abs(bb)) + 1e-300;
        };

        CHECK(theory::k_of_zeta(p.zeta, p.c) ==
              static_cast<int>(oracle::k_of_zeta(p.zeta, p.c)));
        CHECK(rel(theory::xi0(p.zeta, p.c, p.gamma_new), oracle::xi0(p.zeta, p.c, p.gamma_new)));
        CHECK(rel(theory::alpha_add(p),
                  oracle::alpha_add(p.n, p.J, p.c, p.gamma_new, p.gamma_star, p.zeta,
                                    p.lambda_minus, p.ramp_ratio)));
        CHECK(rel(theory::alpha_del(p),
                  oracle::alpha_del(p.n, p.J, p.r, p.gamma_star, p.zeta, p.lambda_minus,
                                    p.vartheta_max, p.phi_plus)));

        const int K = std::min(6, theory::k_of_zeta(p.zeta, p.c));
        auto s = theory::zeta_plus_series(p, K);
        auto so = oracle::zeta_series(p.r, p.c, p.zeta, p.f(), p.kappa_s_plus, p.g_plus,
                                      p.phi_plus, K);
        for (int k = 0; k <= K; ++k) CHECK(rel(s[static_cast<size_t>(k)], so[static_cast<size_t>(k)]));

        const double g = 1.0 + 3.0 * udist(gen);
        const double h = 0.01 * udist(gen);
        auto cb = theory::f_inc_dec(g, h, p);
        auto cbo = oracle::f_inc_dec(g, h, p.r, p.c, p.zeta, p.f(), p.kappa_s_e_plus, p.phi_plus);
        CHECK(rel(cb.f_inc, cbo.inc));
        CHECK(rel(cb.f_dec, cbo.dec));
        ++checked;
    }
    CHECK(checked == 1000);
}

TEST_CASE("condition checker names the violated zeta branch") {
    TheoryParams p = feasible_params(10, 1, 100.0, 1.0, 5.0, 1.0);
    p.zeta *= 10.0; // above the admissible bound
    auto rep = theory::check_conditions(p);
    REQUIRE(!rep.conditions.empty());
    CHECK(rep.conditions[0].name == "0: zeta within bound");
    CHECK(rep.conditions[0].checked);
    CHECK(!rep.conditions[0].pass);
    CHECK(rep.conditions[0].detail.find("branch") != std::string::npos);
    CHECK(!rep.all_checked_pass);
}

TEST_CASE("clustering condition passes at its friendliest point") {
    TheoryParams p = feasible_params(10, 1, 100.0, 1.0, 5.0, 1.0);
    p.g_tilde_max = 1.0;
    p.h_tilde_max = 0.0;
    p.c_tilde_min = 1000000; // c_min * zeta large enough for the margin
    auto rep = theory::check_conditions(p);
    bool found = false;
    for (const auto& c : rep.conditions) {
        if (c.name.rfind("5:", 0) == 0) {
            found = true;
            CHECK(c.pass);
        }
    }
    CHECK(found);
}

TEST_CASE("full report on desk-like parameters matches the oracle values") {
    TheoryParams p = feasible_params(11, 1, 900.0, 1.0, 30.0, 1.0);
    p.n = 256;
    p.J = 2;
    p.g_tilde_max = 4.0;
    p.h_tilde_max = 0.0056;
    p.c_tilde_min = 1;
    p.vartheta_max = 3;
    auto rep = theory::check_conditions(p);
    CHECK(rep.K == theory::k_of_zeta(p.zeta, p.c));
    auto cbo = oracle::f_inc_dec(4.0, 0.0056, p.r, p.c, p.zeta, p.f(), p.kappa_s_e_plus,
                                 p.phi_plus);
    CHECK(rep.f_inc_at_max ==
          doctest::Approx(static_cast<double>(cbo.inc)).epsilon(1e-12));
    CHECK(rep.f_dec_at_max ==
          doctest::Approx(static_cast<double>(cbo.dec)).epsilon(1e-12));
    CHECK(rep.zeta_plus.size() == static_cast<size_t>(rep.K) + 1);
    CHECK(!theory::format_report(rep).empty());
}

TEST_CASE("small-f corollary is evaluated for a single cluster") {
    TheoryParams p = feasible_params(6, 1, 2.0, 1.0, 2.0, 0.5);
    p.vartheta_max = 1;
    p.c_tilde_min = 6;
    auto rep = theory::check_conditions(p);
    REQUIRE(rep.corollary_small_f.has_value());
}

TEST_CASE("per-cluster zeta_tilde series matches direct evaluation") {
    TheoryParams p = feasible_params(11, 1, 900.0, 1.0, 30.0, 1.0);
    theory::ModelMeasurements meas;
    meas.cluster_ghs = {{1.0, 0.0278}, {1.0, 0.0709}, {1.77, 0.0}};
    auto rep = theory::check_conditions(p, meas);
    REQUIRE(rep.zeta_tilde_series.size() == 3);
    for (size_t k = 0; k < 3; ++k) {
        const auto cb = theory::f_inc_dec(meas.cluster_ghs[k].first,
                                          meas.cluster_ghs[k].second, p);
        CHECK(rep.zeta_tilde_series[k] ==
              doctest::Approx(cb.zeta_tilde_plus).epsilon(1e-12));
    }
}

TEST_CASE("checker with a full set of measurements from a tracked run") {
    // Drive a small exact-data run, measure the denseness quantities on the
    // actual estimates, and feed everything to the checker so every
    // condition takes its checked path.
    datagen::ModelConfig m;
    m.n = 24;
    m.r0 = 3;
    m.t_train = 10;
    m.t_max = 40;
    m.gamma_star = 3.0;
    m.gamma0 = {3, 2, 1};
    datagen::EpochSpec e;
    e.t_change = 11;
    e.c_new = 1;
    e.deleted = {2};
    e.gamma_existing = {3, 2};
    e.ramp = {1.0, 1.0, 0, 5};
    m.epochs = {e};
    datagen::SupportSchedule sched;
    sched.s = 0;
    sched.delta = 10;
    sched.t_train = 10;
    const auto seq = datagen::generate(m, sched, 21u);

    tracker::TrackerConfig tc;
    tc.n = 24;
    tc.t_train = 10;
    tc.alpha = 5;
    tc.alpha_tilde = 6;
    tc.K = 3;
    tc.xi.adaptive = false;
    tc.xi.fixed_value = 1e9;
    tc.omega.energy = false;
    tc.omega.fixed_value = 1.0;
    tc.change_times = {11};
    tc.c_new = {1};
    tc.clusters = {{3}};
    tc.deletion_enabled = true;
    tracker::Tracker trk(seq.p[0], tc);
    for (int t = 11; t <= 40; ++t) trk.step(seq.m.col(t - 1));

    const int s = 2; // support size the checker reasons about
    theory::ModelMeasurements meas;
    meas.kappa_2s_star = kappa_s_exact(seq.p[0].matrix(), 2 * s);
    meas.kappa_2s_new = kappa_s_exact(seq.p_new[0].matrix(), 2 * s);
    // With exact data the unestimated parts can vanish entirely; a
    // negligible-norm direction contributes nothing to the denseness bound.
    auto kappa_or_zero = [](const Matrix& b, int order) {
        try {
            return kappa_s_exact(b, order);
        } catch (const DegenerateInputError&) {
            return 0.0;
        }
    };
    double kd = 0.0, kq = 0.0;
    for (const auto& ev : trk.addition_trace()) {
        Matrix d = ev.p_prev.projectOrthogonal(seq.p_new[0].matrix());
        d = ev.p_new_hat.projectOrthogonal(d);
        kd = std::max(kd, kappa_or_zero(d, 2 * s));
        const Matrix q = seq.p_new[0].projectOrthogonal(ev.p_new_hat.matrix());
        kq = std::max(kq, kappa_or_zero(q, 2 * s));
    }
    meas.kappa_D_max = kd;
    meas.kappa_Q_max = kq;
    const auto& last = trk.addition_trace().back();
    Matrix residual = last.p_prev.projectOrthogonal(seq.p[1].matrix());
    residual = last.p_new_hat.projectOrthogonal(residual);
    meas.kappa_s_e = kappa_or_zero(residual, s);
    meas.g_jk_max = 1.0; // one new direction: the covariance ratio is exactly 1
    meas.min_change_gap = 1e9;
    meas.ramp_violation = 0.0;
    meas.s_min = 2.0;

    TheoryParams p = feasible_params(4, 1, 9.0, 1.0, 3.0, 1.0);
    p.vartheta_max = 1;
    p.c_tilde_min = 3;
    meas.k_used = theory::k_of_zeta(p.zeta, p.c);
    meas.xi_used = theory::xi0(p.zeta, p.c, p.gamma_new);
    meas.omega_used = 7.0 * p.rho * *meas.xi_used; // lower edge of the window
    meas.alpha_used = theory::alpha_add(p);
    meas.alpha_tilde_used = theory::alpha_del(p);

    auto rep = theory::check_conditions(p, meas);
    for (const auto& c : rep.conditions) CHECK(c.checked);

    // the denseness condition reflects the measured values
    bool dense_expected = *meas.kappa_2s_star <= 0.3 && *meas.kappa_2s_new <= 0.15 &&
                          kd <= 0.15 && kq <= 0.15 && *meas.kappa_s_e <= p.kappa_s_e_plus;
    for (const auto& c : rep.conditions)
        if (c.name.rfind("2:", 0) == 0) CHECK(c.pass == dense_expected);

    // a measurement pushed past its bound must flip the condition
    meas.kappa_2s_star = 0.31;
    auto rep2 = theory::check_conditions(p, meas);
    for (const auto& c : rep2.conditions)
        if (c.name.rfind("2:", 0) == 0) {
            CHECK(!c.pass);
            CHECK(c.margin < 0.0);
        }
}
