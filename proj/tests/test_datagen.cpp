#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "reprocs/datagen.hpp"
#include "reprocs/harness.hpp"
#include "reprocs/linalg.hpp"

using namespace reprocs;
using datagen::GeneratedSequence;
using datagen::support_at;

namespace {

// A small two-change model used throughout this suite.
datagen::ModelConfig small_model() {
    datagen::ModelConfig m;
    m.n = 40;
    m.r0 = 5;
    m.t_train = 30;
    m.t_max = 700;
    m.gamma_star = 20.0;
    m.gamma0 = {20, 20, 4, 1, 1};
    datagen::EpochSpec e1;
    e1.t_change = 101;
    e1.c_new = 1;
    e1.deleted = {1, 4};
    e1.gamma_existing = {20, 4, 1};
    e1.ramp = {1.0, 1.1, 4, 20};
    datagen::EpochSpec e2;
    e2.t_change = 401;
    e2.c_new = 1;
    e2.deleted = {0};
    e2.gamma_existing = {4, 1, 1.331};
    e2.ramp = {1.0, 1.2, 0, 20};
    m.epochs = {e1, e2};
    return m;
}

datagen::SupportSchedule small_support() {
    datagen::SupportSchedule s;
    s.s = 4;
    s.delta = 10;
    s.t_train = 30;
    return s;
}

} // namespace

TEST_CASE("support schedule: quiet training, shifts, wrap") {
    datagen::SupportSchedule s;
    s.s = 20;
    s.delta = 10;
    s.t_train = 200;
    CHECK(support_at(s, 150, 2048).empty());
    CHECK(support_at(s, 200, 2048).empty());

    // first window [201, 210] carries {0..19}; the next one shifts by one
    auto first = support_at(s, 201, 2048);
    REQUIRE(first.size() == 20);
    CHECK(first.front() == 0);
    CHECK(first.back() == 19);
    CHECK(support_at(s, 210, 2048) == first);
    auto second = support_at(s, 211, 2048);
    CHECK(second.front() == 1);
    CHECK(second.back() == 20);

    // wrap past the end of the index range
    datagen::SupportSchedule w;
    w.s = 3;
    w.delta = 1;
    w.t_train = 0;
    auto wrapped = support_at(w, 10, 10); // q = 9, indices {9, 0, 1}
    CHECK(wrapped == std::vector<int>{0, 1, 9});
}

TEST_CASE("sparse ranks match the correlated-support model at full scale") {
    datagen::SupportSchedule s;
    s.s = 20;
    s.delta = 10;
    s.t_train = 200;
    const Matrix sp = datagen::generate_sparse_only(s, 2048, 2600, 7u);

    auto rank_at = [&](int t) {
        // Columns are supported on few rows; the numeric rank of the
        // nonzero-row restriction equals the full rank.
        std::set<int> rows;
        for (int c = 0; c < t; ++c)
            for (int i = 0; i < 2048; ++i)
                if (sp(i, c) != 0.0) rows.insert(i);
        Matrix sub(static_cast<Eigen::Index>(rows.size()), t);
        int k = 0;
        for (int i : rows) sub.row(k++) = sp.row(i).head(t);
        Eigen::BDCSVD<Matrix> svd(sub);
        const auto& sv = svd.singularValues();
        int rank = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > 1e-9 * sv(0)) ++rank;
        return rank;
    };
    CHECK(rank_at(300) == 29);
    CHECK(rank_at(400) == 39);
    CHECK(rank_at(500) == 49);
    CHECK(rank_at(2600) == 259);
}

TEST_CASE("generated sequence satisfies the structural invariants") {
    const auto seq = datagen::generate(small_model(), small_support(), 3u);
    // exact decomposition: M is defined as the entrywise sum
    CHECK(((seq.s + seq.l) - seq.m).norm() == 0.0);

    // quiet training, exact support size afterwards, magnitude floor
    for (int t = 1; t <= 30; ++t) CHECK(seq.s.col(t - 1).norm() == 0.0);
    for (int t = 31; t <= seq.model.t_max; t += 17) {
        const auto supp = support_at(seq.support, t, seq.model.n);
        CHECK(static_cast<int>(supp.size()) == 4);
        double min_mag = 1e300;
        int nnz = 0;
        for (int i = 0; i < seq.model.n; ++i) {
            if (seq.s(i, t - 1) != 0.0) {
                ++nnz;
                min_mag = std::min(min_mag, std::abs(seq.s(i, t - 1)));
            }
        }
        CHECK(nnz == 4);
        CHECK(min_mag >= 2.0);
    }

    // epoch ranks and the change-model structure
    CHECK(seq.p[0].cols() == 5);
    CHECK(seq.p[1].cols() == 4); // 5 - 2 + 1
    CHECK(seq.p[2].cols() == 4); // 4 - 1 + 1
    // new directions are orthogonal to the previous subspace
    CHECK((seq.p_new[0].matrix().transpose() * seq.p[0].matrix()).norm() < 1e-12);
    CHECK((seq.p_new[1].matrix().transpose() * seq.p[1].matrix())
              .leftCols(seq.p[1].cols() - 1)
              .norm() < 1e-12);
    // L_t lies in span(P_(t))
    for (int t : {10, 150, 450, 700}) {
        const auto& p = seq.p_at(t);
        const Vector l = seq.l.col(t - 1);
        CHECK(p.projectOrthogonal(l).norm() <= 1e-10 * std::max(1.0, l.norm()));
    }

    // determinism
    const auto again = datagen::generate(small_model(), small_support(), 3u);
    CHECK((seq.m - again.m).norm() == 0.0);
}

TEST_CASE("slow subspace change: new coefficients start small and ramp") {
    const auto seq = datagen::generate(small_model(), small_support(), 5u);
    const auto& e1 = seq.model.epochs[0];
    double max_new = 0.0;
    for (int t = e1.t_change; t < e1.t_change + e1.ramp.window; ++t) {
        const Vector& a = seq.a[static_cast<size_t>(t - 1)];
        max_new = std::max(max_new, std::abs(a(a.size() - 1)));
    }
    CHECK(max_new <= e1.ramp.gamma_new);
    // frozen after k_cap windows
    const int t_late = e1.t_change + 10 * e1.ramp.window;
    const auto& gam = seq.gamma_at[static_cast<size_t>(t_late - 1)];
    CHECK(gam.back() == doctest::Approx(std::pow(1.1, 3) * 1.0));
}

TEST_CASE("covariance spectrum is the amplitude table squared over three") {
    const auto seq = datagen::generate(small_model(), small_support(), 5u);
    const Vector lam = seq.covariance_spectrum(10);
    REQUIRE(lam.size() == 5);
    CHECK(lam(0) == doctest::Approx(400.0 / 3.0));
    CHECK(lam(4) == doctest::Approx(1.0 / 3.0));

    // the headline configuration's extremes and condition number
    const auto paper = harness::paper_preset();
    Vector gamma_row(4);
    gamma_row << 400, 30, 2, 1;
    Vector expect(4);
    for (int i = 0; i < 4; ++i) expect(i) = gamma_row(i) * gamma_row(i) / 3.0;
    CHECK(expect(0) == doctest::Approx(53333.3333333).epsilon(1e-9));
    CHECK(expect(1) == doctest::Approx(300.0));
    CHECK(expect(2) == doctest::Approx(1.3333333333).epsilon(1e-9));
    CHECK(expect(3) == doctest::Approx(0.3333333333).epsilon(1e-9));
    CHECK(expect(0) / expect(3) == doctest::Approx(1.6e5).epsilon(1e-9));
    CHECK(paper.model.gamma0.front() == 400.0);
    CHECK(paper.model.gamma0.back() == 1.0);
}

TEST_CASE("full-scale preset: epoch ranks, covariance extremes, slow change") {
    auto cfg = harness::paper_preset();
    const auto seq = datagen::generate(cfg.model, cfg.support, 1u);

    // rank bookkeeping across the two changes: 36 -> 34 -> 32
    CHECK(seq.p[0].cols() == 36);
    CHECK(seq.p[1].cols() == 34);
    CHECK(seq.p[2].cols() == 32);

    // covariance extremes and condition number of the schedule
    const Vector lam = seq.covariance_spectrum(100);
    CHECK(lam(0) == doctest::Approx(53333.3333333).epsilon(1e-6));
    CHECK(lam(lam.size() - 1) == doctest::Approx(0.3333333).epsilon(1e-6));
    CHECK(lam(0) / lam(lam.size() - 1) == doctest::Approx(1.6e5).epsilon(1e-6));

    // the new direction enters quietly: ||a_new||_inf <= gamma_new over the
    // first window after each change
    for (size_t j = 0; j < seq.model.epochs.size(); ++j) {
        const auto& e = seq.model.epochs[j];
        double worst = 0.0;
        for (int t = e.t_change; t < e.t_change + e.ramp.window; ++t) {
            const Vector& a = seq.a[static_cast<size_t>(t - 1)];
            worst = std::max(worst, std::abs(a(a.size() - 1)));
        }
        CHECK(worst <= e.ramp.gamma_new);
    }

    // a noisy training block still pins the initial subspace to 1e-2
    const Matrix training = datagen::training_block(seq, 1e-3);
    const auto init = tracker::estimate_initial_subspace(training, 36);
    const double se = subspace_error(init.basis, seq.p[0]);
    CHECK(se <= 1e-2);
    CHECK(se > 0.0);
}

TEST_CASE("empirical coefficient covariance approaches the schedule") {
    datagen::ModelConfig m;
    m.n = 8;
    m.r0 = 3;
    m.t_train = 10;
    m.t_max = 100000;
    m.gamma_star = 9.0;
    m.gamma0 = {9, 3, 1};
    datagen::SupportSchedule s;
    s.s = 2;
    s.delta = 10;
    s.t_train = 10;
    const auto seq = datagen::generate(m, s, 11u);
    Vector acc = Vector::Zero(3);
    for (const auto& a : seq.a) acc += a.cwiseAbs2();
    acc /= static_cast<double>(seq.a.size());
    const Vector lam = seq.covariance_spectrum(1);
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(acc(i) - lam(i)) <= 0.05 * lam(i));
}

TEST_CASE("training block adds bounded noise and keeps the estimate close") {
    const auto seq = datagen::generate(small_model(), small_support(), 9u);
    const Matrix clean = datagen::training_block(seq, 0.0);
    CHECK((clean - seq.l.leftCols(30)).norm() == 0.0);

    const Matrix noisy = datagen::training_block(seq, 1e-3);
    CHECK((noisy - clean).cwiseAbs().maxCoeff() <= 1e-3);

    const auto init = tracker::estimate_initial_subspace(noisy, seq.model.r0);
    CHECK(subspace_error(init.basis, seq.p[0]) <= 1e-2);
    CHECK(subspace_error(init.basis, seq.p[0]) > 0.0);
}

TEST_CASE("sequence binary round-trips bit-exactly") {
    const auto seq = datagen::generate(small_model(), small_support(), 13u);
    const std::string path = "/tmp/reprocs_seq_test.bin";
    datagen::write_sequence(seq, path);
    const auto loaded = datagen::read_sequence(path);
    CHECK((loaded.m - seq.m).norm() == 0.0);
    CHECK((loaded.s - seq.s).norm() == 0.0);
    CHECK((loaded.l - seq.l).norm() == 0.0);
}

TEST_CASE("inconsistent schedules are rejected") {
    auto m = small_model();
    m.epochs[0].deleted = {7}; // out of range for a rank-5 basis
    CHECK_THROWS_AS(datagen::generate(m, small_support(), 1u), ConfigError);

    auto m2 = small_model();
    m2.epochs[0].gamma_existing.pop_back();
    CHECK_THROWS_AS(datagen::generate(m2, small_support(), 1u), ConfigError);

    auto m3 = small_model();
    m3.epochs[1].t_change = m3.epochs[0].t_change; // not strictly increasing
    CHECK_THROWS_AS(datagen::generate(m3, small_support(), 1u), ConfigError);
}

TEST_CASE("rng streams are independent and reproducible") {
    const datagen::CounterRng rng(42);
    const double a = rng.uniform01(datagen::CounterRng::Stream::Coefficient, 7);
    const double b = rng.uniform01(datagen::CounterRng::Stream::SupportSign, 7);
    CHECK(a != b);
    const datagen::CounterRng rng2(42);
    CHECK(rng2.uniform01(datagen::CounterRng::Stream::Coefficient, 7) == a);

    // editing the support schedule leaves the low-dimensional part untouched
    auto s1 = small_support();
    auto s2 = small_support();
    s2.delta = 25;
    const auto seq1 = datagen::generate(small_model(), s1, 17u);
    const auto seq2 = datagen::generate(small_model(), s2, 17u);
    CHECK((seq1.l - seq2.l).norm() == 0.0);
    CHECK((seq1.s - seq2.s).norm() != 0.0);
}
