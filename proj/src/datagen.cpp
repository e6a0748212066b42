#include "reprocs/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <numbers>

#include "reprocs/linalg.hpp"

namespace reprocs::datagen {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

} // namespace

double CounterRng::uniform01(Stream s, std::uint64_t index) const {
    const std::uint64_t h = splitmix64(splitmix64(seed_ ^ static_cast<std::uint64_t>(s)) + index);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double CounterRng::gaussian(Stream s, std::uint64_t index) const {
    double u1 = uniform01(s, 2 * index);
    const double u2 = uniform01(s, 2 * index + 1);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<int> support_at(const SupportSchedule& sched, int t, int n) {
    if (t <= sched.t_train) return {};
    const int q = (t - sched.t_train - 1) / sched.delta;
    std::vector<int> supp(static_cast<size_t>(sched.s));
    for (int i = 0; i < sched.s; ++i) supp[static_cast<size_t>(i)] = (q + i) % n;
    std::sort(supp.begin(), supp.end());
    return supp;
}

int GeneratedSequence::epoch_at(int t) const {
    int j = 0;
    for (const auto& e : model.epochs) {
        if (t >= e.t_change) ++j;
        else break;
    }
    return j;
}

Vector GeneratedSequence::covariance_spectrum(int t) const {
    const auto& g = gamma_at.at(static_cast<size_t>(t - 1));
    Vector lam(static_cast<Eigen::Index>(g.size()));
    for (size_t i = 0; i < g.size(); ++i)
        lam(static_cast<Eigen::Index>(i)) = g[i] * g[i] / 3.0;
    std::sort(lam.data(), lam.data() + lam.size(), std::greater<double>());
    return lam;
}

namespace {

// Amplitude of the ramping block during window k (1-based) after t_change.
double ramp_gamma(const Ramp& ramp, double gamma_star, int t, int t_change) {
    int k = (t - t_change) / ramp.window + 1;
    if (ramp.k_cap > 0) k = std::min(k, ramp.k_cap);
    return std::min(std::pow(ramp.ratio, k - 1) * ramp.gamma_new, gamma_star);
}

void validate(const ModelConfig& model, const SupportSchedule& support) {
    if (model.n < 1 || model.r0 < 1 || model.t_train < 1 || model.t_max <= model.t_train)
        throw ConfigError("generate: n, r0, t_train, t_max are inconsistent");
    if (static_cast<int>(model.gamma0.size()) != model.r0)
        throw ConfigError("generate: gamma0 must have r0 entries");
    if (support.s < 0 || support.s > model.n || support.delta < 1)
        throw ConfigError("generate: bad support schedule");
    int r = model.r0;
    int prev_t = model.t_train;
    for (size_t j = 0; j < model.epochs.size(); ++j) {
        const auto& e = model.epochs[j];
        if (e.t_change <= prev_t)
            throw ConfigError("generate: change times must be strictly increasing and after t_train");
        prev_t = e.t_change;
        if (static_cast<int>(e.deleted.size()) > r)
            throw ConfigError("generate: epoch " + std::to_string(j + 1) +
                              " deletes more directions than exist");
        for (int d : e.deleted)
            if (d < 0 || d >= r)
                throw ConfigError("generate: deleted index out of range in epoch " +
                                  std::to_string(j + 1));
        const int kept = r - static_cast<int>(e.deleted.size());
        if (static_cast<int>(e.gamma_existing.size()) != kept)
            throw ConfigError("generate: epoch " + std::to_string(j + 1) +
                              " amplitude table must have " + std::to_string(kept) + " entries");
        r = kept + e.c_new;
        if (r < 1) throw ConfigError("generate: subspace rank dropped to zero");
        if (e.c_new > 0 && e.ramp.window < 1)
            throw ConfigError("generate: ramp window must be positive");
    }
    if (prev_t >= model.t_max)
        throw ConfigError("generate: last change time is beyond t_max");
}

} // namespace

GeneratedSequence generate(const ModelConfig& model, const SupportSchedule& support,
                           std::uint64_t seed) {
    validate(model, support);
    const CounterRng rng(seed);
    const int n = model.n;
    const int J = static_cast<int>(model.epochs.size());

    int total_cols = model.r0;
    for (const auto& e : model.epochs) total_cols += e.c_new;

    // Orthonormalized random Gaussian U; its columns are identities that
    // survive across epochs, which keeps coefficient draws stable under
    // schedule edits.
    Matrix g(n, total_cols);
    for (int c = 0; c < total_cols; ++c)
        for (int i = 0; i < n; ++i)
            g(i, c) = rng.gaussian(CounterRng::Stream::BasisU,
                                   static_cast<std::uint64_t>(c) * n + i);
    const Matrix u = qr_decompose(g).q.matrix();

    GeneratedSequence seq;
    seq.model = model;
    seq.support = support;
    seq.seed = seed;

    // Active column sets per epoch, as indices into U.
    std::vector<std::vector<int>> cols(static_cast<size_t>(J) + 1);
    cols[0].resize(static_cast<size_t>(model.r0));
    for (int i = 0; i < model.r0; ++i) cols[0][static_cast<size_t>(i)] = i;
    int next_new = model.r0;
    for (int j = 1; j <= J; ++j) {
        const auto& e = model.epochs[static_cast<size_t>(j - 1)];
        std::vector<bool> drop(cols[static_cast<size_t>(j - 1)].size(), false);
        for (int d : e.deleted) drop[static_cast<size_t>(d)] = true;
        for (size_t i = 0; i < cols[static_cast<size_t>(j - 1)].size(); ++i)
            if (!drop[i]) cols[static_cast<size_t>(j)].push_back(cols[static_cast<size_t>(j - 1)][i]);
        for (int c = 0; c < e.c_new; ++c) cols[static_cast<size_t>(j)].push_back(next_new++);
    }

    seq.p.reserve(static_cast<size_t>(J) + 1);
    for (int j = 0; j <= J; ++j) {
        Matrix pj(n, static_cast<Eigen::Index>(cols[static_cast<size_t>(j)].size()));
        for (size_t i = 0; i < cols[static_cast<size_t>(j)].size(); ++i)
            pj.col(static_cast<Eigen::Index>(i)) = u.col(cols[static_cast<size_t>(j)][i]);
        seq.p.emplace_back(pj);
        if (j >= 1) {
            const auto& e = model.epochs[static_cast<size_t>(j - 1)];
            Matrix pn(n, e.c_new);
            for (int c = 0; c < e.c_new; ++c)
                pn.col(c) = pj.col(pj.cols() - e.c_new + c);
            seq.p_new.emplace_back(pn);
        }
    }

    seq.s = Matrix::Zero(n, model.t_max);
    seq.l = Matrix::Zero(n, model.t_max);
    seq.a.resize(static_cast<size_t>(model.t_max));
    seq.gamma_at.resize(static_cast<size_t>(model.t_max));

    for (int t = 1; t <= model.t_max; ++t) {
        const int j = seq.epoch_at(t);
        const auto& active = cols[static_cast<size_t>(j)];
        const int rj = static_cast<int>(active.size());
        std::vector<double>& gammas = seq.gamma_at[static_cast<size_t>(t - 1)];
        gammas.resize(static_cast<size_t>(rj));
        if (j == 0) {
            for (int i = 0; i < rj; ++i) gammas[static_cast<size_t>(i)] = model.gamma0[static_cast<size_t>(i)];
        } else {
            const auto& e = model.epochs[static_cast<size_t>(j - 1)];
            const int kept = rj - e.c_new;
            for (int i = 0; i < kept; ++i) gammas[static_cast<size_t>(i)] = e.gamma_existing[static_cast<size_t>(i)];
            const double gnew = ramp_gamma(e.ramp, model.gamma_star, t, e.t_change);
            for (int i = kept; i < rj; ++i) gammas[static_cast<size_t>(i)] = gnew;
        }

        Vector at(rj);
        for (int i = 0; i < rj; ++i) {
            const std::uint64_t idx =
                static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(total_cols) +
                static_cast<std::uint64_t>(active[static_cast<size_t>(i)]);
            const double gi = gammas[static_cast<size_t>(i)];
            at(i) = rng.uniform(CounterRng::Stream::Coefficient, idx, -gi, gi);
        }
        seq.a[static_cast<size_t>(t - 1)] = at;
        seq.l.col(t - 1) = seq.p[static_cast<size_t>(j)].matrix() * at;

        const std::vector<int> supp = support_at(support, t, n);
        for (size_t pos = 0; pos < supp.size(); ++pos) {
            const std::uint64_t idx =
                static_cast<std::uint64_t>(t) * 4096ull + static_cast<std::uint64_t>(pos);
            const double mag = rng.uniform(CounterRng::Stream::SupportMagnitude, idx,
                                           support.mag_low, support.mag_high);
            const double sign =
                rng.uniform01(CounterRng::Stream::SupportSign, idx) < 0.5 ? -1.0 : 1.0;
            seq.s(supp[pos], t - 1) = sign * mag;
        }
    }
    seq.m = seq.s + seq.l;
    return seq;
}

Matrix generate_sparse_only(const SupportSchedule& support, int n, int t_max,
                            std::uint64_t seed) {
    const CounterRng rng(seed);
    Matrix s = Matrix::Zero(n, t_max);
    for (int t = 1; t <= t_max; ++t) {
        const std::vector<int> supp = support_at(support, t, n);
        for (size_t pos = 0; pos < supp.size(); ++pos) {
            const std::uint64_t idx =
                static_cast<std::uint64_t>(t) * 4096ull + static_cast<std::uint64_t>(pos);
            const double mag = rng.uniform(CounterRng::Stream::SupportMagnitude, idx,
                                           support.mag_low, support.mag_high);
            const double sign =
                rng.uniform01(CounterRng::Stream::SupportSign, idx) < 0.5 ? -1.0 : 1.0;
            s(supp[pos], t - 1) = sign * mag;
        }
    }
    return s;
}

Matrix training_block(const GeneratedSequence& seq, double noise_amplitude) {
    if (noise_amplitude < 0.0)
        throw ArgumentError("training_block: negative noise amplitude");
    const CounterRng rng(seq.seed);
    Matrix block = seq.l.leftCols(seq.model.t_train);
    if (noise_amplitude > 0.0) {
        for (Eigen::Index c = 0; c < block.cols(); ++c)
            for (Eigen::Index i = 0; i < block.rows(); ++i)
                block(i, c) += rng.uniform(
                    CounterRng::Stream::TrainingNoise,
                    static_cast<std::uint64_t>(c) * static_cast<std::uint64_t>(block.rows()) + i,
                    -noise_amplitude, noise_amplitude);
    }
    return block;
}

namespace {

void put_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_matrix(std::ofstream& os, const Matrix& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double v = m(i, c);
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            unsigned char b[8];
            for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xff);
            os.write(reinterpret_cast<const char*>(b), 8);
        }
}

Matrix read_matrix(std::ifstream& is, int n, int t) {
    Matrix m(n, t);
    for (int c = 0; c < t; ++c)
        for (int i = 0; i < n; ++i) {
            unsigned char b[8];
            is.read(reinterpret_cast<char*>(b), 8);
            std::uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
            double v;
            std::memcpy(&v, &bits, 8);
            m(i, c) = v;
        }
    return m;
}

} // namespace

void write_sequence(const GeneratedSequence& seq, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("write_sequence: cannot open " + path);
    os.write("RPCS", 4);
    put_u32(os, 1u);
    put_u32(os, static_cast<std::uint32_t>(seq.m.rows()));
    put_u32(os, static_cast<std::uint32_t>(seq.m.cols()));
    write_matrix(os, seq.m);
    write_matrix(os, seq.s);
    write_matrix(os, seq.l);
    if (!os) throw ConfigError("write_sequence: short write to " + path);
}

LoadedSequence read_sequence(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("read_sequence: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, "RPCS", 4) != 0)
        throw ConfigError("read_sequence: bad magic in " + path);
    const std::uint32_t version = get_u32(is);
    if (version != 1u)
        throw ConfigError("read_sequence: unsupported version " + std::to_string(version));
    const int n = static_cast<int>(get_u32(is));
    const int t = static_cast<int>(get_u32(is));
    LoadedSequence out;
    out.m = read_matrix(is, n, t);
    out.s = read_matrix(is, n, t);
    out.l = read_matrix(is, n, t);
    if (!is) throw ConfigError("read_sequence: truncated file " + path);
    return out;
}

} // namespace reprocs::datagen
