#include "reprocs/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace reprocs::theory {

int k_of_zeta(double zeta, int c) {
    if (c < 1) throw ArgumentError("k_of_zeta: c must be positive");
    const long double arg = 0.6L * static_cast<long double>(c) * static_cast<long double>(zeta);
    if (!(arg > 0.0L && arg < 1.0L))
        throw RegimeError("k_of_zeta: 0.6*c*zeta must lie in (0,1), got " +
                          std::to_string(static_cast<double>(arg)));
    const long double ratio = std::log(arg) / std::log(0.6L);
    const long double snapped = std::round(ratio);
    if (std::abs(ratio - snapped) < 1e-9L)
        return static_cast<int>(snapped);
    return static_cast<int>(std::ceil(ratio));
}

double xi0(double zeta, int c, double gamma_new) {
    if (zeta < 0.0 || c < 0 || gamma_new < 0.0)
        throw ArgumentError("xi0: arguments must be nonnegative");
    return std::sqrt(static_cast<double>(c)) * gamma_new + 1.06 * std::sqrt(zeta);
}

double alpha_add(const TheoryParams& p) {
    const int K = k_of_zeta(p.zeta, p.c);
    const double gn = p.gamma_new;
    const double ramp4 = std::min(std::pow(p.ramp_ratio, 4.0 * K) * std::pow(gn, 4.0),
                                  std::pow(p.gamma_star, 4.0));
    const double term3 = 0.186 * gn * gn + 0.0034 * gn + 2.3;
    const double peak = std::max({ramp4, 16.0 / (static_cast<double>(p.c) * p.c),
                                  4.0 * term3 * term3});
    const double denom = p.zeta * p.lambda_minus;
    const double value = (std::log(6.0 * K * p.J) + 11.0 * std::log(static_cast<double>(p.n))) *
                         (8.0 * 24.0 * 24.0 / (denom * denom)) * peak;
    return std::max(1.0, std::ceil(value));
}

double alpha_del(const TheoryParams& p) {
    const double b7_base = std::sqrt(static_cast<double>(p.r)) * p.gamma_star +
                           p.phi_plus * std::sqrt(p.zeta);
    const double b7 = b7_base * b7_base;
    const double peak = std::max(4.2 * 4.2, 4.0 * b7 * b7);
    const double denom = p.zeta * p.lambda_minus;
    const double value = (std::log(6.0 * p.vartheta_max * p.J) +
                          11.0 * std::log(static_cast<double>(p.n))) *
                         (8.0 * 10.0 * 10.0 / (denom * denom)) * peak;
    return std::max(1.0, std::ceil(value));
}

std::vector<double> zeta_plus_series(const TheoryParams& p, int k_steps) {
    if (k_steps < 0) throw ArgumentError("zeta_plus_series: negative step count");
    const double zs = p.r * p.zeta; // ζ*⁺
    const double zs2 = zs * zs;
    const double f = p.f();
    const double cz = p.c * p.zeta;
    const double kappa = p.kappa_s_plus;
    const double phi = p.phi_plus;
    const double root = std::sqrt(1.0 - zs2);

    const double C = 2.0 * kappa * phi / root + phi;
    const double Cp = phi * phi + 2.0 * phi / root + 1.0 + phi +
                      kappa * phi / root + kappa * phi * phi / root;
    const double Ct = phi * phi + kappa * phi * phi / root;

    std::vector<double> series;
    series.reserve(static_cast<size_t>(k_steps) + 1);
    series.push_back(1.0);
    for (int k = 1; k <= k_steps; ++k) {
        const double prev = series.back();
        const double b = C * kappa * p.g_plus * prev +
                         Ct * kappa * kappa * p.g_plus * prev * prev +
                         Cp * f * zs2;
        const double denom = 1.0 - zs2 - zs2 * f - 0.25 * cz - b;
        if (!(denom > 0.0))
            throw RegimeError("zeta_plus_series: nonpositive denominator at step k=" +
                              std::to_string(k) + " (denominator " + std::to_string(denom) + ")");
        series.push_back((b + 0.125 * cz) / denom);
    }
    return series;
}

ClusterBound f_inc_dec(double g_tilde, double h_tilde, const TheoryParams& p) {
    const double rc = static_cast<double>(p.r) + p.c;
    const double z = p.zeta;
    const double r = static_cast<double>(p.r);
    const double ke = p.kappa_s_e_plus;
    const double phi = p.phi_plus;
    const double f = p.f();
    const double r2z2 = r * r * z * z;
    if (!(r2z2 < 1.0))
        throw RegimeError("f_inc_dec: r*zeta must be below 1");

    const double g_coef = 3.0 * ke * phi;
    const double h_coef = ke * phi + ke * (1.0 + 2.0 * phi) * r2z2 / std::sqrt(1.0 - r2z2);
    const double f_coef = (r * r / rc) * z + 4.0 * r * z * ke * phi +
                          2.0 * rc * z * (1.0 + ke * ke) * phi * phi;

    ClusterBound out;
    out.f_inc = rc * z * (g_coef * g_tilde + h_coef * h_tilde + f_coef * f + 0.2 / rc);
    out.f_dec = 1.0 - h_tilde - 0.2 * z - r2z2 * f - r2z2 - out.f_inc;
    if (!(out.f_dec > 0.0))
        throw RegimeError("f_inc_dec: f_dec is nonpositive (" + std::to_string(out.f_dec) + ")");
    out.zeta_tilde_plus = out.f_inc / out.f_dec;
    return out;
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

ConditionCheck make_check(std::string name, bool pass, double margin, std::string detail) {
    ConditionCheck c;
    c.name = std::move(name);
    c.checked = true;
    c.pass = pass;
    c.margin = margin;
    c.detail = std::move(detail);
    return c;
}

ConditionCheck unchecked(std::string name, std::string why) {
    ConditionCheck c;
    c.name = std::move(name);
    c.checked = false;
    c.detail = std::move(why);
    return c;
}

} // namespace

BoundReport check_conditions(const TheoryParams& p, const ModelMeasurements& m) {
    BoundReport rep;
    rep.K = k_of_zeta(p.zeta, p.c);
    rep.xi0_value = xi0(p.zeta, p.c, p.gamma_new);
    rep.alpha_add_value = alpha_add(p);
    rep.alpha_del_value = alpha_del(p);

    // Condition 0: the admissible range of zeta, three branches.
    {
        const double rc = static_cast<double>(p.r) + p.c;
        const double b1 = 1e-4 / (rc * rc);
        const double b2 = 1.5e-4 / (rc * rc * p.f());
        const double b3 = 1.0 / (rc * rc * rc * p.gamma_star * p.gamma_star);
        const double bound = std::min({b1, b2, b3});
        std::string branch = (bound == b1) ? "1e-4/(r+c)^2"
                           : (bound == b2) ? "1.5e-4/((r+c)^2 f)"
                                           : "1/((r+c)^3 gamma_star^2)";
        rep.conditions.push_back(make_check(
            "0: zeta within bound", p.zeta <= bound, bound - p.zeta,
            "zeta = " + num(p.zeta) + ", binding branch " + branch + " = " + num(bound)));
    }

    // Condition 1: algorithm parameters.
    if (m.xi_used && m.omega_used && m.k_used && m.alpha_used && m.alpha_tilde_used && m.s_min) {
        const double xi = *m.xi_used;
        const double lo = 7.0 * p.rho * xi;
        const double hi = *m.s_min - 7.0 * p.rho * xi;
        const bool xi_ok = std::abs(xi - rep.xi0_value) <= 1e-9 * std::max(1.0, rep.xi0_value);
        const bool om_ok = (*m.omega_used >= lo) && (*m.omega_used <= hi);
        const bool k_ok = *m.k_used >= rep.K;
        const bool a_ok = *m.alpha_used >= rep.alpha_add_value;
        const bool at_ok = *m.alpha_tilde_used >= rep.alpha_del_value;
        const bool pass = xi_ok && om_ok && k_ok && a_ok && at_ok;
        std::ostringstream d;
        d << "xi==xi0: " << xi_ok << ", omega in [" << lo << "," << hi << "]: " << om_ok
          << ", K>=K(zeta): " << k_ok << ", alpha>=alpha_add: " << a_ok
          << ", alpha_tilde>=alpha_del: " << at_ok;
        rep.conditions.push_back(make_check("1: algorithm parameters", pass,
                                            pass ? 0.0 : -1.0, d.str()));
    } else {
        rep.conditions.push_back(unchecked("1: algorithm parameters",
                                           "xi/omega/K/alpha measurements not supplied"));
    }

    // Condition 2: denseness of the model subspaces.
    {
        bool any = false, pass = true;
        double margin = 1.0;
        std::ostringstream d;
        auto fold = [&](const std::optional<double>& v, double bound, const char* tag) {
            if (!v) return;
            any = true;
            pass = pass && (*v <= bound);
            margin = std::min(margin, bound - *v);
            d << tag << " = " << *v << " (bound " << bound << ") ";
        };
        fold(m.kappa_2s_star, p.kappa_2s_star_plus, "kappa_2s(P_{j-1})");
        fold(m.kappa_2s_new, p.kappa_2s_new_plus, "kappa_2s(P_new)");
        fold(m.kappa_D_max, p.kappa_s_plus, "kappa(D_new_k)");
        fold(m.kappa_Q_max, p.kappa_2s_tilde_plus, "kappa(Q_new_k)");
        fold(m.kappa_s_e, p.kappa_s_e_plus, "kappa_s_e");
        if (any)
            rep.conditions.push_back(make_check("2: denseness", pass, margin, d.str()));
        else
            rep.conditions.push_back(unchecked("2: denseness", "no kappa measurements supplied"));
    }

    // Condition 3: slow subspace change.
    {
        bool any = false, pass = true;
        double margin = 1e300;
        std::ostringstream d;
        if (m.min_change_gap && m.alpha_used && m.alpha_tilde_used) {
            any = true;
            const double need = *m.alpha_used * rep.K + p.vartheta_max * *m.alpha_tilde_used;
            pass = pass && (*m.min_change_gap > need);
            margin = std::min(margin, *m.min_change_gap - need);
            d << "min gap " << *m.min_change_gap << " vs K*alpha+theta*alpha_tilde " << need << "; ";
        }
        if (m.ramp_violation) {
            any = true;
            pass = pass && (*m.ramp_violation <= 0.0);
            margin = std::min(margin, -*m.ramp_violation);
            d << "gamma_new ramp excess " << *m.ramp_violation << "; ";
        }
        if (m.s_min) {
            any = true;
            const double lhs = 14.0 * p.rho * rep.xi0_value;
            pass = pass && (lhs <= *m.s_min);
            margin = std::min(margin, *m.s_min - lhs);
            d << "14*rho*xi0 = " << lhs << " vs S_min " << *m.s_min;
        }
        if (any)
            rep.conditions.push_back(make_check("3: slow subspace change", pass, margin, d.str()));
        else
            rep.conditions.push_back(unchecked("3: slow subspace change", "no measurements supplied"));
    }

    // Condition 4: average condition number of the new-direction covariance.
    if (m.g_jk_max) {
        rep.conditions.push_back(make_check("4: g_{j,k} <= sqrt(2)", *m.g_jk_max <= p.g_plus,
                                            p.g_plus - *m.g_jk_max,
                                            "measured g_max = " + num(*m.g_jk_max)));
    } else {
        rep.conditions.push_back(unchecked("4: g_{j,k} <= sqrt(2)", "g measurement not supplied"));
    }

    // Condition 5: clustered eigenvalues.
    {
        ConditionCheck c;
        c.name = "5: clustering admits deletion";
        c.checked = true;
        try {
            const ClusterBound cb = f_inc_dec(p.g_tilde_max, p.h_tilde_max, p);
            rep.f_inc_at_max = cb.f_inc;
            rep.f_dec_at_max = cb.f_dec;
            rep.zeta_tilde_plus_at_max = cb.zeta_tilde_plus;
            const double lhs = cb.f_dec - cb.f_inc / (p.c_tilde_min * p.zeta);
            c.pass = lhs > 0.0;
            c.margin = lhs;
            c.detail = "f_dec - f_inc/(c_min*zeta) = " + num(lhs);
        } catch (const RegimeError& e) {
            c.pass = false;
            c.margin = -1.0;
            c.detail = e.what();
        }
        rep.conditions.push_back(std::move(c));
    }

    // Small-f shortcut of the deletion guarantee, meaningful when there is a
    // single cluster.
    if (p.vartheta_max == 1) {
        ConditionCheck c;
        c.name = "corollary: f_inc(f,0) <= f_dec(f,0)*c_min*zeta";
        c.checked = true;
        try {
            const ClusterBound cb = f_inc_dec(p.f(), 0.0, p);
            const double rhs = cb.f_dec * p.c_tilde_min * p.zeta;
            c.pass = cb.f_inc <= rhs;
            c.margin = rhs - cb.f_inc;
            c.detail = "f_inc = " + num(cb.f_inc) + ", bound = " + num(rhs);
        } catch (const RegimeError& e) {
            c.pass = false;
            c.margin = -1.0;
            c.detail = e.what();
        }
        rep.corollary_small_f = std::move(c);
    }

    try {
        rep.zeta_plus = zeta_plus_series(p, rep.K);
    } catch (const RegimeError& e) {
        rep.conditions.push_back(make_check("zeta_k+ series", false, -1.0, e.what()));
    }

    for (const auto& [g, h] : m.cluster_ghs) {
        try {
            rep.zeta_tilde_series.push_back(f_inc_dec(g, h, p).zeta_tilde_plus);
        } catch (const RegimeError&) {
            rep.zeta_tilde_series.push_back(std::numeric_limits<double>::quiet_NaN());
        }
    }

    rep.all_checked_pass = true;
    for (const auto& c : rep.conditions)
        if (c.checked && !c.pass) rep.all_checked_pass = false;
    return rep;
}

std::string format_report(const BoundReport& r) {
    std::ostringstream os;
    os << "K(zeta)      = " << r.K << "\n";
    os << "xi0(zeta)    = " << r.xi0_value << "\n";
    os << "alpha_add    = " << r.alpha_add_value << "\n";
    os << "alpha_del    = " << r.alpha_del_value << "\n";
    os << "f_inc(gmax,hmax) = " << r.f_inc_at_max
       << ", f_dec = " << r.f_dec_at_max
       << ", zeta_tilde+ = " << r.zeta_tilde_plus_at_max << "\n";
    os << "zeta_k+ series:";
    for (double z : r.zeta_plus) os << " " << z;
    os << "\n";
    if (!r.zeta_tilde_series.empty()) {
        os << "zeta_tilde_k+ series:";
        for (double z : r.zeta_tilde_series) os << " " << z;
        os << "\n";
    }
    for (const auto& c : r.conditions) {
        os << "  [" << (c.checked ? (c.pass ? "PASS" : "FAIL") : "SKIP") << "] " << c.name;
        if (c.checked) os << " (margin " << c.margin << ")";
        if (!c.detail.empty()) os << " :: " << c.detail;
        os << "\n";
    }
    if (r.corollary_small_f) {
        const auto& c = *r.corollary_small_f;
        os << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.name << " :: " << c.detail << "\n";
    }
    os << "verdict: " << (r.all_checked_pass ? "all checked conditions hold" : "some conditions fail")
       << "\n";
    return os.str();
}

} // namespace reprocs::theory
