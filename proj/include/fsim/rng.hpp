#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fsim {

// splitmix64; fixed-width ops only, so sequences are identical across
// platforms and compilers.
inline std::uint64_t splitmix64_next(std::uint64_t& s) {
    s += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Derives an independent stream from a root seed and a purpose name
// ("init/<var>", "factor/<id>", ...). Streams depend only on (root, name),
// so adding a factor never perturbs the draws of existing ones.
inline std::uint64_t stream_seed(std::uint64_t root, const std::string& purpose) {
    std::uint64_t s = root ^ (fnv1a64(purpose) * 0x9E3779B97F4A7C15ull);
    splitmix64_next(s);
    return splitmix64_next(s);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next() { return splitmix64_next(state_); }

    // uniform in [0, 1)
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // uniform in [0, n); multiply-shift keeps it branchless and portable
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    std::uint64_t state_;
};

// Source of the primitive random draws an expression body can make. The
// production implementation wraps a seeded stream; tests substitute sources
// that force or enumerate every choice while running the same interpreter.
// Parameters arrive already validated (p in [0,1], a <= b, weights
// normalized and nonnegative).
class ChoiceSource {
public:
    virtual ~ChoiceSource() = default;
    virtual bool bernoulli(double p) = 0;
    virtual long long uniform_int(long long a, long long b) = 0;  // inclusive
    virtual double uniform_real(double a, double b) = 0;
    virtual int categorical(const std::vector<double>& weights) = 0;
};

class StreamChoice : public ChoiceSource {
public:
    explicit StreamChoice(std::uint64_t seed = 0) : rng_(seed) {}

    bool bernoulli(double p) override { return rng_.next_unit() < p; }

    long long uniform_int(long long a, long long b) override {
        return a + static_cast<long long>(rng_.below(static_cast<std::uint64_t>(b - a + 1)));
    }

    double uniform_real(double a, double b) override {
        return a + (b - a) * rng_.next_unit();
    }

    int categorical(const std::vector<double>& weights) override {
        double total = 0;
        for (double w : weights) total += w;
        double u = rng_.next_unit() * total;
        double acc = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

private:
    Rng rng_;
};

}  // namespace fsim
