#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "l1zo/parallel.hpp"
#include "l1zo/rng.hpp"
#include "l1zo/vec.hpp"

namespace l1zo::detail {

// Per-chunk running moments, merged in chunk order (Chan et al.).
struct Moments {
    double count = 0.0;
    Vec mean;
    Vec m2;

    explicit Moments(std::size_t k = 0) : mean(k, 0.0), m2(k, 0.0) {}

    void push(std::span<const double> v) {
        count += 1.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double delta = v[i] - mean[i];
            mean[i] += delta / count;
            m2[i] += delta * (v[i] - mean[i]);
        }
    }

    void merge(const Moments& o) {
        if (o.count == 0.0) return;
        const double total = count + o.count;
        for (std::size_t i = 0; i < mean.size(); ++i) {
            const double delta = o.mean[i] - mean[i];
            mean[i] += delta * o.count / total;
            m2[i] += o.m2[i] + delta * delta * count * o.count / total;
        }
        count = total;
    }

    Vec std_error() const {
        Vec se(mean.size(), 0.0);
        if (count < 2.0) return se;
        for (std::size_t i = 0; i < mean.size(); ++i) se[i] = std::sqrt(m2[i] / (count - 1.0) / count);
        return se;
    }
};

template <class Sample>
Moments chunked_moments(std::size_t samples, std::size_t width, unsigned threads, const RngStream& stream,
                        Sample&& sample) {
    const std::size_t chunks = (samples + kMonteCarloChunk - 1) / kMonteCarloChunk;
    std::vector<Moments> partial(chunks, Moments(width));
    parallel_for(chunks, threads, [&](std::size_t k) {
        Rng rng(substream(stream, k));
        const std::size_t begin = k * kMonteCarloChunk;
        const std::size_t end = std::min(samples, begin + kMonteCarloChunk);
        Vec out(width);
        for (std::size_t s = begin; s < end; ++s) {
            sample(rng, out);
            partial[k].push(out);
        }
    });
    Moments total(width);
    for (const auto& p : partial) total.merge(p);
    return total;
}

}  // namespace l1zo::detail
