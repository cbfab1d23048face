#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "support.hpp"

using namespace lasp;

namespace {

std::vector<StoredSample> make_samples(const std::vector<int>& classes, std::size_t per_class, int task,
                                       std::size_t dim = 3) {
    std::vector<StoredSample> out;
    for (int c : classes) {
        for (std::size_t i = 0; i < per_class; ++i) {
            StoredSample s;
            s.input.assign(dim, 0.0);
            s.input[0] = c;
            s.input[1] = static_cast<double>(i);
            s.input[2] = 0.1 * task + 1e-3 * static_cast<double>(i);
            s.label = c;
            s.key = c;
            s.task = task;
            out.push_back(s);
        }
    }
    return out;
}

void expect_balanced(const ReplayBuffer& b) {
    const auto counts = b.counts();
    std::size_t lo = SIZE_MAX;
    std::size_t hi = 0;
    for (const auto& [k, n] : counts) {
        lo = std::min(lo, n);
        hi = std::max(hi, n);
    }
    EXPECT_LE(hi - lo, 1u);
    EXPECT_LE(b.size(), b.capacity());
}

}  // namespace

TEST(Quotas, ExactDivision) {
    const auto q = ReplayBuffer::quotas(10, {0, 1, 2, 3, 4});
    for (const auto& [c, n] : q) {
        EXPECT_EQ(n, 2u);
    }
}

TEST(Quotas, RemainderToLowestIds) {
    const auto q = ReplayBuffer::quotas(7, {5, 1, 9});
    EXPECT_EQ(q.at(1), 3u);
    EXPECT_EQ(q.at(5), 2u);
    EXPECT_EQ(q.at(9), 2u);
}

TEST(Quotas, TooSmallIsAnError) { EXPECT_THROW((void)ReplayBuffer::quotas(2, {0, 1, 2}), Error); }

TEST(ReplayBuffer, GrowingClassSets) {
    ReplayBuffer b(200, 1);
    b.rebalance_after_task(make_samples({0, 1}, 300, 0));
    EXPECT_EQ(b.counts(), (std::map<int, std::size_t>{{0, 100}, {1, 100}}));
    b.rebalance_after_task(make_samples({2, 3}, 300, 1));
    EXPECT_EQ(b.counts(), (std::map<int, std::size_t>{{0, 50}, {1, 50}, {2, 50}, {3, 50}}));
    b.rebalance_after_task(make_samples({4, 5}, 300, 2));
    EXPECT_EQ(b.counts(), (std::map<int, std::size_t>{{0, 34}, {1, 34}, {2, 33}, {3, 33}, {4, 33}, {5, 33}}));
}

TEST(ReplayBuffer, InvariantsOverSixTasks) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const std::size_t cap = 20 + rng.below(200);
        ReplayBuffer b(cap, seed);
        std::size_t fewest = SIZE_MAX;
        for (int t = 0; t < 6; ++t) {
            // Uneven task sizes, including a task with fewer samples than quota.
            const std::size_t per = 1 + rng.below(60);
            fewest = std::min(fewest, per);
            b.rebalance_after_task(make_samples({2 * t, 2 * t + 1}, per, t));
            EXPECT_LE(b.size(), cap);
            const auto q = ReplayBuffer::quotas(cap, [&] {
                std::set<int> s;
                for (const auto& [k, n] : b.counts()) {
                    s.insert(k);
                }
                return s;
            }());
            for (const auto& [k, n] : b.counts()) {
                EXPECT_LE(n, q.at(k));
            }
            // Balance is only reachable when no class ran short of its quota.
            if (fewest >= (cap + b.counts().size() - 1) / b.counts().size()) {
                expect_balanced(b);
            }
        }
    }
}

TEST(ReplayBuffer, AmpleDataIsAlwaysBalanced) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ReplayBuffer b(97, seed);
        for (int t = 0; t < 6; ++t) {
            b.rebalance_after_task(make_samples({2 * t, 2 * t + 1}, 120, t));
            expect_balanced(b);
        }
    }
}

TEST(ReplayBuffer, StoredSamplesAreBitIdentical) {
    ReplayBuffer b(40, 3);
    const auto first = make_samples({0, 1}, 50, 0);
    b.rebalance_after_task(first);
    b.rebalance_after_task(make_samples({2, 3}, 50, 1));
    for (const auto* s : b.flattened()) {
        const auto& pool = s->task == 0 ? first : make_samples({2, 3}, 50, 1);
        EXPECT_NE(std::find(pool.begin(), pool.end(), *s), pool.end());
    }
}

TEST(ReplayBuffer, SameSeedSameContents) {
    ReplayBuffer a(30, 9);
    ReplayBuffer b(30, 9);
    ReplayBuffer c(30, 10);
    const auto s = make_samples({0, 1, 2}, 40, 0);
    a.rebalance_after_task(s);
    b.rebalance_after_task(s);
    c.rebalance_after_task(s);
    EXPECT_EQ(a.slots(), b.slots());
    EXPECT_NE(a.slots(), c.slots());
}

TEST(ReplayBuffer, SampleFullSizeIsPermutation) {
    ReplayBuffer b(12, 4);
    b.rebalance_after_task(make_samples({0, 1, 2}, 10, 0));
    Rng rng(5);
    const auto draw = b.sample(b.size(), rng);
    ASSERT_EQ(draw.size(), b.size());
    std::vector<StoredSample> all;
    for (const auto* s : b.flattened()) {
        all.push_back(*s);
    }
    for (const auto& s : all) {
        EXPECT_EQ(std::count(draw.begin(), draw.end(), s), 1);
    }
}

TEST(ReplayBuffer, SampleIsDeterministic) {
    ReplayBuffer b(12, 4);
    b.rebalance_after_task(make_samples({0, 1, 2}, 10, 0));
    Rng r1(6);
    Rng r2(6);
    EXPECT_EQ(b.sample(5, r1), b.sample(5, r2));
}

TEST(ReplayBuffer, SampleWithReplacementWhenLarger) {
    ReplayBuffer b(4, 4);
    b.rebalance_after_task(make_samples({0, 1}, 10, 0));
    Rng rng(7);
    EXPECT_EQ(b.sample(9, rng).size(), 9u);
}

TEST(ReplayBuffer, SampleFromEmptyThrows) {
    ReplayBuffer b(4, 4);
    Rng rng(7);
    EXPECT_THROW((void)b.sample(1, rng), Error);
}

// Multinomial check: each of the `size` items should appear with frequency
// 1/size within 3 standard deviations over 1e5 single draws.
TEST(ReplayBuffer, SingleDrawsAreUniform) {
    ReplayBuffer b(10, 4);
    b.rebalance_after_task(make_samples({0, 1}, 20, 0));
    const auto all = b.flattened();
    std::map<std::pair<int, double>, int> hits;
    Rng rng(8);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const auto s = b.sample(1, rng).front();
        ++hits[{s.label, s.input[1]}];
    }
    const double p = 1.0 / static_cast<double>(all.size());
    const double sd = std::sqrt(n * p * (1.0 - p));
    EXPECT_EQ(hits.size(), all.size());
    for (const auto& [k, h] : hits) {
        EXPECT_NEAR(h, n * p, 3.0 * sd);
    }
}

TEST(ReplayBuffer, SerializeRoundTrip) {
    ReplayBuffer b(20, 4);
    b.rebalance_after_task(make_samples({0, 1, 2}, 10, 0));
    const auto bytes = b.serialize();
    const auto back = ReplayBuffer::deserialize(bytes);
    EXPECT_EQ(back.slots(), b.slots());
    EXPECT_EQ(back.capacity(), 20u);
    EXPECT_THROW((void)ReplayBuffer::deserialize({bytes.begin(), bytes.end() - 3}), FormatError);
}

TEST(ReplayBuffer, DomainKeysKeepRotatedCopiesApart) {
    // Same labels under two tasks get distinct keys.
    EXPECT_NE(buffer_key(Scenario::domain_incremental, 3, 0, 10), buffer_key(Scenario::domain_incremental, 3, 1, 10));
    EXPECT_EQ(buffer_key(Scenario::class_incremental, 3, 4, 10), 3);
    ReplayBuffer b(40, 1);
    auto t0 = make_samples({0, 1}, 30, 0);
    auto t1 = make_samples({0, 1}, 30, 1);
    for (auto& s : t1) {
        s.key = buffer_key(Scenario::domain_incremental, s.label, 1, 2);
    }
    b.rebalance_after_task(t0);
    b.rebalance_after_task(t1);
    EXPECT_EQ(b.counts().size(), 4u);
    expect_balanced(b);
}
