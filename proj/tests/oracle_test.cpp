#include "vizproxy/gallery.hpp"
#include "vizproxy/oracle.hpp"
#include "vizproxy/rewrite.hpp"

#include "support/files.hpp"
#include "support/gen.hpp"
#include "support/reference.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>

using namespace vizproxy;
using vizproxy::testing::fixtureSpec;
using vizproxy::testing::fixtureTask;

namespace {

Table abTable(std::vector<std::pair<std::string, double>> rows) {
    std::vector<Row> out;
    for (auto& [k, v] : rows) out.push_back({Value{k}, Value{v}});
    return Table(galleryInputSchema(), std::move(out));
}

std::map<std::string, reference::GroupStats> statsByKey(const Table& t) {
    std::map<std::string, reference::GroupStats> out;
    for (const auto& g : reference::aggregate(gen::pairsOf(t))) out[g.key] = g;
    return out;
}

} // namespace

// ─── sampleDataset ──────────────────────────────────────────────────────

TEST(SampleDataset, SameIndexSameTable) {
    auto f = galleryFamily(42);
    for (std::uint64_t i = 0; i < 50; ++i) EXPECT_TRUE(tablesEqual(sampleDataset(f, i), sampleDataset(f, i), 0));
}

TEST(SampleDataset, SeedChangesTheSequence) {
    int differ = 0;
    for (std::uint64_t i = 0; i < 50; ++i)
        if (describe(sampleDataset(galleryFamily(1), i)) != describe(sampleDataset(galleryFamily(2), i))) ++differ;
    EXPECT_GT(differ, 40);
}

TEST(SampleDataset, FixedRowCount) {
    auto f = galleryFamily(3);
    f.minRows = f.maxRows = 3;
    for (std::uint64_t i = 0; i < 100; ++i) EXPECT_EQ(sampleDataset(f, i).rowCount(), 3u);
}

TEST(SampleDataset, SingletonDomain) {
    auto f = galleryFamily(4);
    f.groupDomain = {"A"};
    for (std::uint64_t i = 0; i < 100; ++i) {
        auto t = sampleDataset(f, i);
        for (const auto& r : t.rows()) EXPECT_EQ(std::get<std::string>(r[0]), "A");
    }
}

TEST(SampleDataset, StaysInBounds) {
    DatasetFamily f{galleryInputSchema(), {"A", "B"}, 2, 5, -3, 4, 5, false};
    std::set<double> seen;
    for (std::uint64_t i = 0; i < 500; ++i) {
        auto t = sampleDataset(f, i);
        EXPECT_GE(t.rowCount(), 2u);
        EXPECT_LE(t.rowCount(), 5u);
        for (const auto& r : t.rows()) {
            double v = std::get<double>(r[1]);
            EXPECT_EQ(v, std::floor(v));
            EXPECT_GE(v, -3);
            EXPECT_LE(v, 4);
            seen.insert(v);
        }
    }
    EXPECT_EQ(seen.size(), 8u);
}

TEST(SampleDataset, FloatModeDrawsReals) {
    DatasetFamily f{galleryInputSchema(), {"A"}, 8, 8, 0, 1, 6, true};
    int fractional = 0;
    auto t = sampleDataset(f, 0);
    for (const auto& r : t.rows())
        if (std::get<double>(r[1]) != std::floor(std::get<double>(r[1]))) ++fractional;
    EXPECT_GT(fractional, 0);
}

TEST(SampleDataset, RejectsOutOfBoundFamilies) {
    auto f = galleryFamily();
    f.groupDomain = {"A", "B", "C", "D", "E"};
    EXPECT_THROW(sampleDataset(f, 0), Error);
    f = galleryFamily();
    f.maxRows = 9;
    EXPECT_THROW(sampleDataset(f, 0), Error);
    f = galleryFamily();
    f.valueLo = 5;
    f.valueHi = 4;
    EXPECT_THROW(sampleDataset(f, 0), Error);
}

// ─── verifyProxy ────────────────────────────────────────────────────────

TEST(VerifyProxy, PieLookupPasses) {
    auto q = fixtureTask("percA");
    auto s = gallerySpec("pie");
    auto r = verifyProxy(q, s, analyze(q, s), galleryFamily(), 1000, 1e-9);
    EXPECT_TRUE(r.passed());
    EXPECT_EQ(r.trials, 1000u);
    EXPECT_LT(r.skipped, 500u);
}

TEST(VerifyProxy, StackInversionPasses) {
    auto q = fixtureTask("percB");
    auto s = gallerySpec("propStacked");
    auto r = verifyProxy(q, s, analyze(q, s), galleryFamily(), 1000, 1e-9);
    EXPECT_TRUE(r.passed());
}

TEST(VerifyProxy, CorruptedPlanFailsWithADataset) {
    auto q = fixtureTask("percB");
    auto s = gallerySpec("propStacked");
    auto plan = analyze(q, s);
    ASSERT_EQ(plan.ops.back().kind, ProxyOpKind::InvertStack);
    plan.ops.back().kind = ProxyOpKind::SumK;
    auto r = verifyProxy(q, s, plan, galleryFamily(), 200, 1e-9);
    ASSERT_FALSE(r.passed());
    const auto& f = r.failures.front();
    // Independent check on the recorded dataset: B's share differs from the endpoint sum.
    auto segs = reference::stackedPercentages(gen::pairsOf(f.dataset));
    auto b = std::find_if(segs.begin(), segs.end(), [](const auto& x) { return x.key == "B"; });
    ASSERT_NE(b, segs.end());
    EXPECT_NE(b->perc, b->upper + b->lower);
    for (std::size_t i = 1; i < r.failures.size(); ++i) EXPECT_LT(r.failures[i - 1].trial, r.failures[i].trial);
}

TEST(VerifyProxy, ZeroTrialsPassVacuously) {
    auto q = fixtureTask("percA");
    auto s = gallerySpec("bar");
    auto r = verifyProxy(q, s, analyze(q, s), galleryFamily(), 0, 1e-9);
    EXPECT_TRUE(r.passed());
    EXPECT_EQ(r.trials, 0u);
}

TEST(VerifyProxy, ImpossiblePlanIsAHarnessError) {
    auto q = fixtureTask("countby");
    auto s = gallerySpec("bar");
    try {
        verifyProxy(q, s, analyze(q, s), galleryFamily(), 10, 1e-9);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Harness);
    }
}

TEST(VerifyProxy, UnreadableAttributeIsAHarnessError) {
    auto q = fixtureTask("percA");
    auto plan = analyze(q, gallerySpec("pie"));
    // The pie plan reads perc, which the bar chart does not show.
    try {
        verifyProxy(q, gallerySpec("bar"), plan, galleryFamily(), 10, 1e-9);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Harness);
        EXPECT_NE(std::string(e.what()).find("perc"), std::string::npos);
    }
}

TEST(VerifyProxy, SkipsSamplesWhereTheTaskIsUndefined) {
    auto q = fixtureTask("percA");
    auto s = gallerySpec("pie");
    auto f = galleryFamily();
    f.groupDomain = {"B", "C"};
    auto r = verifyProxy(q, s, analyze(q, s), f, 50, 1e-9);
    EXPECT_TRUE(r.passed());
    EXPECT_EQ(r.skipped, 50u);
}

// ─── searchCounterexample ───────────────────────────────────────────────

TEST(SearchCounterexample, CountFromSumOnFirstConstruction) {
    auto q = fixtureTask("countby");
    auto s = gallerySpec("bar");
    auto w = searchCounterexample(q, s, galleryFamily(), 10000);
    ASSERT_TRUE(w);
    EXPECT_EQ(w->construction, "merge-rows");
    EXPECT_EQ(w->candidates, 1u);
    EXPECT_TRUE(tablesEqual(w->d1, abTable({{"A", 1}, {"A", 1}}), 0));
    EXPECT_TRUE(tablesEqual(w->d2, abTable({{"A", 2}}), 0));
    // Independent check: equal sums, different counts.
    auto g1 = statsByKey(w->d1), g2 = statsByKey(w->d2);
    EXPECT_EQ(g1["A"].sum, g2["A"].sum);
    EXPECT_NE(g1["A"].count, g2["A"].count);
}

TEST(SearchCounterexample, CountsDoNotDetermineAverages) {
    auto q = fixtureTask("avg_v_by_g");
    auto s = fixtureSpec("group_counts");
    DatasetFamily f{q.input, {"A", "B", "C"}, 1, 8, 0, 9, 9, false};
    auto w = searchCounterexample(q, s, f, 10000);
    ASSERT_TRUE(w);
    auto g1 = statsByKey(w->d1), g2 = statsByKey(w->d2);
    bool avgDiffers = false;
    ASSERT_EQ(g1.size(), g2.size());
    for (const auto& [k, a] : g1) {
        ASSERT_TRUE(g2.count(k));
        EXPECT_EQ(a.count, g2[k].count);
        if (a.sum / a.count != g2[k].sum / g2[k].count) avgDiffers = true;
    }
    EXPECT_TRUE(avgDiffers);
}

TEST(SearchCounterexample, PrecomputedSumHasNone) {
    auto q = fixtureTask("sumby");
    auto w = searchCounterexample(q, gallerySpec("bar"), galleryFamily(), 3000);
    EXPECT_FALSE(w.has_value());
}

TEST(SearchCounterexample, PositiveBudgetRequired) {
    EXPECT_THROW(searchCounterexample(fixtureTask("countby"), gallerySpec("bar"), galleryFamily(), 0), Error);
}

TEST(SearchCounterexample, RespectsBudget) {
    auto q = fixtureTask("sumby");
    auto s = gallerySpec("bar");
    // Nothing to find, so the search must stop at the budget rather than loop.
    for (std::size_t b : {1u, 7u, 100u}) EXPECT_FALSE(searchCounterexample(q, s, galleryFamily(), b));
}

TEST(SearchCounterexample, IsDeterministic) {
    auto q = fixtureTask("readbar");
    auto s = gallerySpec("pie");
    auto a = searchCounterexample(q, s, galleryFamily(5), 10000);
    auto b = searchCounterexample(q, s, galleryFamily(5), 10000);
    ASSERT_TRUE(a && b);
    EXPECT_EQ(counterexampleToJson(*a).dump(), counterexampleToJson(*b).dump());
}

TEST(SearchCounterexample, FloatModeWitness) {
    auto q = fixtureTask("readbar");
    auto s = gallerySpec("pie");
    auto f = galleryFamily(8);
    f.floatMode = true;
    auto w = searchCounterexample(q, s, f, 10000);
    ASSERT_TRUE(w);
    double v1 = std::get<double>(std::get<Value>(w->q1)), v2 = std::get<double>(std::get<Value>(w->q2));
    EXPECT_GT(std::abs(v1 - v2), 100 * 1e-9);
}

TEST(SearchCounterexample, SumsDoNotDetermineMaxima) {
    // Shifting one unit between two rows of a group keeps its sum and moves its maximum.
    auto q = parseTask("max b by a at a = 'A'", galleryInputSchema());
    auto s = gallerySpec("bar");
    auto w = searchCounterexample(q, s, galleryFamily(), 10000);
    ASSERT_TRUE(w);
    auto g1 = statsByKey(w->d1), g2 = statsByKey(w->d2);
    EXPECT_EQ(g1["A"].sum, g2["A"].sum);
    EXPECT_NE(g1["A"].max, g2["A"].max);
}

TEST(SearchCounterexample, WitnessesCertifyIndependently) {
    // Every witness over the gallery is rechecked against the reference stats.
    for (const auto& t : {"countby", "readpoint", "readbar", "sumby"})
        for (const auto& s : {"bar", "pie", "propStacked"}) {
            auto q = fixtureTask(t);
            auto spec = gallerySpec(s);
            if (analyze(q, spec).verdict.answerable()) continue;
            auto w = searchCounterexample(q, spec, galleryFamily(), 10000);
            ASSERT_TRUE(w) << t << " x " << s;
            auto g1 = reference::aggregate(gen::pairsOf(w->d1));
            auto g2 = reference::aggregate(gen::pairsOf(w->d2));
            auto seg1 = reference::stackedPercentages(gen::pairsOf(w->d1));
            auto seg2 = reference::stackedPercentages(gen::pairsOf(w->d2));
            if (std::string(s) == "bar") {
                std::map<std::string, double> a, b;
                for (const auto& g : g1) a[g.key] = g.sum;
                for (const auto& g : g2) b[g.key] = g.sum;
                EXPECT_EQ(a, b) << t << " x " << s;
            } else {
                ASSERT_EQ(seg1.size(), seg2.size());
                for (std::size_t i = 0; i < seg1.size(); ++i) {
                    EXPECT_EQ(seg1[i].key, seg2[i].key);
                    EXPECT_NEAR(seg1[i].perc, seg2[i].perc, 1e-9);
                }
            }
            EXPECT_FALSE(resultsClose(w->q1, w->q2, 1e-9));
        }
}
