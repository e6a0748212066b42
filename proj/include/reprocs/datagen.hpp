#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reprocs/types.hpp"

namespace reprocs::datagen {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, index), so the streams for the basis, the supports, the
/// coefficients and the training noise never perturb one another when one
/// schedule changes. splitmix64 finalizer underneath.
class CounterRng {
public:
    enum class Stream : std::uint64_t {
        BasisU = 0x9e3779b97f4a7c15ull,
        SupportSign = 0xbf58476d1ce4e5b9ull,
        SupportMagnitude = 0x94d049bb133111ebull,
        Coefficient = 0xd6e8feb86659fd93ull,
        TrainingNoise = 0xa5a5a5a55a5a5a5aull,
    };

    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    double uniform01(Stream s, std::uint64_t index) const;
    double uniform(Stream s, std::uint64_t index, double lo, double hi) const {
        return lo + (hi - lo) * uniform01(s, index);
    }
    /// Standard normal via Box-Muller; consumes indices 2i and 2i+1.
    double gaussian(Stream s, std::uint64_t index) const;

private:
    std::uint64_t seed_;
};

/// Geometric ramp of the new-direction amplitude: γ_new,k = v^{k−1}·γ_new for
/// the k-th window of `window` frames after the change time, frozen after
/// `k_cap` windows, never above the global cap γ*.
struct Ramp {
    double gamma_new = 1.0;
    double ratio = 1.1;
    int k_cap = 0; // 0 means no freeze, cap at gamma_star only
    int window = 100;
};

/// One subspace change: directions leave, directions enter, amplitudes for
/// the surviving coordinates are re-tabulated.
struct EpochSpec {
    int t_change = 0;                   // t_j, 1-based
    int c_new = 0;
    std::vector<int> deleted;           // 0-based positions within P_{j-1}
    std::vector<double> gamma_existing; // per kept column, in P_j order
    Ramp ramp;
};

struct ModelConfig {
    int n = 0;
    int r0 = 0;
    int t_train = 0;
    int t_max = 0;
    std::vector<double> gamma0; // amplitudes before the first change, size r0
    std::vector<EpochSpec> epochs;
    double gamma_star = 1.0;    // global amplitude cap
};

struct SupportSchedule {
    int s = 0;
    int delta = 1;      // frames between one-index shifts
    int t_train = 0;
    double mag_low = 2.0;
    double mag_high = 3.0;
};

/// 0-based support at time t (1-based frame index); empty for t ≤ t_train.
/// Shifts wrap modulo n once the window walks off the end.
std::vector<int> support_at(const SupportSchedule& sched, int t, int n);

/// Ground truth for one run plus the schedule metadata needed to evaluate
/// it; everything downstream (plots, probes, condition checks) reads from
/// here.
struct GeneratedSequence {
    ModelConfig model;
    SupportSchedule support;
    std::uint64_t seed = 0;

    Matrix m; // n × t_max, M = S + L entrywise
    Matrix s;
    Matrix l;

    std::vector<BasisMatrix> p;        // P_j, j = 0..J
    std::vector<BasisMatrix> p_new;    // P_{j,new}, j = 1..J (index j-1)
    std::vector<Vector> a;             // coefficient vector per frame
    std::vector<std::vector<double>> gamma_at; // |a_t|-bounds per frame

    int epoch_at(int t) const; // j with t_j ≤ t < t_{j+1}; 0 before the first change
    const BasisMatrix& p_at(int t) const { return p[static_cast<size_t>(epoch_at(t))]; }
    /// Diagonal of Λ_t = diag(γ_{i,t}²/3), sorted non-increasing.
    Vector covariance_spectrum(int t) const;
};

/// Deterministic synthesis of (M, S, L) under the change model. Throws
/// ConfigError when the schedule is inconsistent (deletions out of range,
/// tables of the wrong length, changes too close to fit).
GeneratedSequence generate(const ModelConfig& model, const SupportSchedule& support,
                           std::uint64_t seed);

/// Sparse part only; enough for support/rank studies at full scale without
/// materializing L and M.
Matrix generate_sparse_only(const SupportSchedule& support, int n, int t_max,
                            std::uint64_t seed);

/// First t_train columns of L plus i.i.d. uniform noise in
/// [−amplitude, amplitude].
Matrix training_block(const GeneratedSequence& seq, double noise_amplitude);

/// Flat binary export: magic "RPCS", version u32, n u32, t_max u32, then
/// column-major little-endian f64 for M, S, L in that order.
void write_sequence(const GeneratedSequence& seq, const std::string& path);

struct LoadedSequence {
    Matrix m, s, l;
};
LoadedSequence read_sequence(const std::string& path);

} // namespace reprocs::datagen
