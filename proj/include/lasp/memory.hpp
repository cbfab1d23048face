#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "lasp/error.hpp"
#include "lasp/rng.hpp"
#include "lasp/serialize.hpp"

namespace lasp {

// A raw input as stored in memory. `key` is the buffer class: the label for
// class/task-incremental streams, a (label, task) pair id for domain streams.
struct StoredSample {
    std::vector<double> input;
    int label = 0;
    int key = 0;
    int task = 0;

    bool operator==(const StoredSample&) const = default;
};

// Fixed-capacity, class-balanced replay memory.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 0, std::uint64_t seed = 0) : capacity_(capacity), rng_(seed) {}

    [[nodiscard]] std::size_t capacity() const { return capacity_; }
    [[nodiscard]] bool empty() const { return size() == 0; }

    [[nodiscard]] std::size_t size() const {
        std::size_t n = 0;
        for (const auto& [key, samples] : slots_) {
            n += samples.size();
        }
        return n;
    }

    [[nodiscard]] std::map<int, std::size_t> counts() const {
        std::map<int, std::size_t> out;
        for (const auto& [key, samples] : slots_) {
            out[key] = samples.size();
        }
        return out;
    }

    [[nodiscard]] const std::map<int, std::vector<StoredSample>>& slots() const { return slots_; }

    // floor(capacity / classes) each; the remainder goes one apiece to the
    // lowest class ids.
    static std::map<int, std::size_t> quotas(std::size_t capacity, const std::set<int>& classes) {
        std::map<int, std::size_t> out;
        if (classes.empty()) {
            return out;
        }
        if (capacity < classes.size()) {
            throw Error("replay buffer too small: capacity " + std::to_string(capacity) + " < " +
                        std::to_string(classes.size()) + " classes");
        }
        const std::size_t base = capacity / classes.size();
        std::size_t remainder = capacity % classes.size();
        for (int c : classes) {
            out[c] = base + (remainder > 0 ? 1 : 0);
            if (remainder > 0) {
                --remainder;
            }
        }
        return out;
    }

    // Admits a finished task. Stored classes are down-sampled to their new
    // quota and new classes are filled by a uniform draw from the task.
    void rebalance_after_task(const std::vector<StoredSample>& new_task_samples) {
        std::map<int, std::vector<StoredSample>> incoming;
        for (const auto& s : new_task_samples) {
            incoming[s.key].push_back(s);
        }
        std::set<int> classes;
        for (const auto& [key, samples] : slots_) {
            classes.insert(key);
        }
        for (const auto& [key, samples] : incoming) {
            classes.insert(key);
        }
        if (capacity_ == 0) {
            slots_.clear();
            return;
        }
        const auto quota = quotas(capacity_, classes);
        std::map<int, std::vector<StoredSample>> next;
        for (int c : classes) {
            std::vector<StoredSample> pool;
            if (auto it = slots_.find(c); it != slots_.end()) {
                pool = std::move(it->second);
            }
            if (auto it = incoming.find(c); it != incoming.end()) {
                pool.insert(pool.end(), it->second.begin(), it->second.end());
            }
            const std::size_t q = quota.at(c);
            if (pool.size() > q) {
                auto keep = rng_.choose(pool.size(), q);
                std::sort(keep.begin(), keep.end());
                std::vector<StoredSample> kept;
                kept.reserve(q);
                for (auto idx : keep) {
                    kept.push_back(std::move(pool[idx]));
                }
                pool = std::move(kept);
            }
            next[c] = std::move(pool);
        }
        slots_ = std::move(next);
    }

    // Uniform without replacement when n <= size, with replacement otherwise.
    [[nodiscard]] std::vector<StoredSample> sample(std::size_t n, Rng& rng) const {
        const auto all = flattened();
        if (all.empty()) {
            throw Error("cannot sample from an empty replay buffer");
        }
        std::vector<StoredSample> out;
        out.reserve(n);
        if (n <= all.size()) {
            for (auto idx : rng.choose(all.size(), n)) {
                out.push_back(*all[idx]);
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                out.push_back(*all[rng.below(all.size())]);
            }
        }
        return out;
    }

    [[nodiscard]] std::vector<const StoredSample*> flattened() const {
        std::vector<const StoredSample*> out;
        for (const auto& [key, samples] : slots_) {
            for (const auto& s : samples) {
                out.push_back(&s);
            }
        }
        return out;
    }

    [[nodiscard]] std::vector<std::uint8_t> serialize() const {
        io::ByteWriter w;
        w.u64(capacity_);
        w.u64(slots_.size());
        for (const auto& [key, samples] : slots_) {
            w.i64(key);
            w.u64(samples.size());
            for (const auto& s : samples) {
                w.i64(s.label);
                w.i64(s.task);
                w.u64(s.input.size());
                for (double v : s.input) {
                    w.f64(v);
                }
            }
        }
        return w.bytes();
    }

    static ReplayBuffer deserialize(const std::vector<std::uint8_t>& bytes, std::uint64_t seed = 0) {
        io::ByteReader r(bytes);
        ReplayBuffer b(r.u64(), seed);
        const auto n_slots = r.u64();
        for (std::uint64_t i = 0; i < n_slots; ++i) {
            const int key = static_cast<int>(r.i64());
            const auto n = r.u64();
            auto& slot = b.slots_[key];
            for (std::uint64_t j = 0; j < n; ++j) {
                StoredSample s;
                s.key = key;
                s.label = static_cast<int>(r.i64());
                s.task = static_cast<int>(r.i64());
                const auto dim = r.u64();
                if (dim > r.remaining() / 8) {
                    throw FormatError("corrupt buffer section");
                }
                s.input.resize(dim);
                for (auto& v : s.input) {
                    v = r.f64();
                }
                slot.push_back(std::move(s));
            }
        }
        if (!r.at_end()) {
            throw FormatError("corrupt buffer section: trailing bytes");
        }
        return b;
    }

private:
    std::size_t capacity_;
    std::map<int, std::vector<StoredSample>> slots_;
    Rng rng_;
};

}  // namespace lasp
