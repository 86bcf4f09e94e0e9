#include "vizproxy/csv.hpp"
#include "vizproxy/pipeline.hpp"

#include "support/gen.hpp"
#include "support/reference.hpp"

#include <gtest/gtest.h>

using namespace vizproxy;

namespace {

Schema abSchema() { return Schema({{"a", ValueType::Text}, {"b", ValueType::Number}}); }

Table ab(std::vector<std::pair<std::string, double>> rows) {
    std::vector<Row> out;
    for (auto& [k, v] : rows) out.push_back({Value{k}, Value{v}});
    return Table(abSchema(), std::move(out));
}

reference::Pairs pairsOf(const Table& t) {
    reference::Pairs out;
    for (const auto& r : t.rows()) out.emplace_back(std::get<std::string>(r[0]), std::get<double>(r[1]));
    return out;
}

Pipeline pieChartPipeline() {
    return Pipeline{{GroupAggregateOp{{"a"}, {{AggFn::Sum, "b", "c"}}}, NormalizeOp{"c", "perc"},
                     StackOp{"perc", {"a"}, "d0", "d"}}};
}

ErrorKind kindOf(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorKind::Harness;
}

} // namespace

// ─── loadCsv ────────────────────────────────────────────────────────────

TEST(LoadCsv, InfersTextAndNumberColumns) {
    auto t = loadCsv("a,b\nA,1\nB,2");
    EXPECT_EQ(t.schema(), abSchema());
    ASSERT_EQ(t.rowCount(), 2u);
    EXPECT_EQ(t.rows()[1][1], Value{2.0});
}

TEST(LoadCsv, RaggedRowReportsIndex) {
    try {
        loadCsv("a,b\nA,1\nB");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Ingest);
        EXPECT_NE(std::string(e.what()).find("ragged row at index 2"), std::string::npos) << e.what();
    }
}

TEST(LoadCsv, ExplicitSchemaTypeErrorNamesCell) {
    try {
        loadCsv("a,b\nA,1\nB,x", abSchema());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Type);
        EXPECT_NE(std::string(e.what()).find("(row 2, col b)"), std::string::npos) << e.what();
    }
}

TEST(LoadCsv, QuotedFieldsAndNulls) {
    auto t = loadCsv("name,v\n\"x, \"\"y\"\"\",\n\"multi\nline\",3\r\n");
    ASSERT_EQ(t.rowCount(), 2u);
    EXPECT_EQ(t.rows()[0][0], Value{std::string("x, \"y\"")});
    EXPECT_TRUE(isNull(t.rows()[0][1]));
    EXPECT_EQ(t.rows()[1][0], Value{std::string("multi\nline")});
    EXPECT_EQ(t.schema()[1].type, ValueType::Number);
}

TEST(LoadCsv, RejectsNonFiniteNumbersUnderSchema) {
    EXPECT_EQ(kindOf([] { loadCsv("a,b\nA,inf", abSchema()); }), ErrorKind::Type);
    EXPECT_EQ(loadCsv("a,b\nA,nan").schema()[1].type, ValueType::Text);
}

TEST(LoadCsv, RoundTripsThroughToCsv) {
    auto t = loadCsv("a,b\nA,1.5\n\"q,r\",\n");
    EXPECT_TRUE(tablesEqual(loadCsv(toCsv(t)), t, 0.0));
}

// ─── executePipeline ────────────────────────────────────────────────────

TEST(ExecutePipeline, EmptyPipelineIsIdentity) {
    auto d = ab({{"A", 1}, {"A", 2}, {"B", 3}});
    EXPECT_TRUE(tablesEqual(executePipeline(d, Pipeline{}), d, 0.0));
}

TEST(ExecutePipeline, GroupSumMatchesReferenceAggregator) {
    auto d = ab({{"A", 1}, {"A", 2}, {"B", 3}});
    auto p = executePipeline(d, Pipeline{{GroupAggregateOp{{"a"}, {{AggFn::Sum, "b", "c"}}}}});
    auto ref = reference::aggregate(pairsOf(d));
    ASSERT_EQ(p.rowCount(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
        EXPECT_EQ(p.rows()[i][0], Value{ref[i].key});
        EXPECT_EQ(p.rows()[i][1], Value{ref[i].sum});
    }
    // Frozen from the reference: {(A,3),(B,3)}.
    EXPECT_TRUE(tablesEqual(p, Table(Schema({{"a", ValueType::Text}, {"c", ValueType::Number}}),
                                     {{Value{"A"}, Value{3.0}}, {Value{"B"}, Value{3.0}}}),
                            0.0));
}

TEST(ExecutePipeline, PieChartPipelineMatchesReference) {
    auto d = ab({{"A", 1}, {"B", 3}});
    auto p = executePipeline(d, pieChartPipeline());
    auto ref = reference::stackedPercentages(pairsOf(d));
    ASSERT_EQ(p.rowCount(), 2u);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        EXPECT_NEAR(std::get<double>(p.at(i, "perc")), ref[i].perc, 1e-12);
        EXPECT_NEAR(std::get<double>(p.at(i, "d0")), ref[i].lower, 1e-12);
        EXPECT_NEAR(std::get<double>(p.at(i, "d")), ref[i].upper, 1e-12);
    }
    Schema s({{"a", ValueType::Text}, {"c", ValueType::Number}, {"perc", ValueType::Number},
              {"d0", ValueType::Number}, {"d", ValueType::Number}});
    Table expected(s, {{Value{"A"}, Value{1.0}, Value{0.25}, Value{0.0}, Value{0.25}},
                       {Value{"B"}, Value{3.0}, Value{0.75}, Value{0.25}, Value{1.0}}});
    EXPECT_TRUE(tablesEqual(p, expected, 1e-12));
}

TEST(ExecutePipeline, GroupsEmitInFirstAppearanceOrder) {
    auto p = executePipeline(ab({{"C", 1}, {"A", 1}, {"C", 2}}),
                             Pipeline{{GroupAggregateOp{{"a"}, {{AggFn::Count, "", "n"}}}}});
    EXPECT_EQ(p.rows()[0][0], Value{"C"});
    EXPECT_EQ(p.rows()[0][1], Value{2.0});
    EXPECT_EQ(p.rows()[1][0], Value{"A"});
}

TEST(ExecutePipeline, DivisionByZeroNamesExpression) {
    auto d = ab({{"A", 0}});
    try {
        executePipeline(d, Pipeline{{DeriveOp{"r", parseExpr("1 / b")}}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Eval);
        EXPECT_NE(std::string(e.what()).find("1 / b"), std::string::npos);
    }
}

TEST(ExecutePipeline, NormalizeZeroTotal) {
    try {
        executePipeline(ab({{"A", 0}, {"B", 0}}), Pipeline{{NormalizeOp{"b", "p"}}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Eval);
        EXPECT_NE(std::string(e.what()).find("zero total"), std::string::npos);
    }
}

TEST(ExecutePipeline, SchemaViolations) {
    auto d = ab({{"A", 1}});
    EXPECT_EQ(kindOf([&] { executePipeline(d, Pipeline{{ProjectOp{{"zz"}}}}); }), ErrorKind::Schema);
    EXPECT_EQ(kindOf([&] { executePipeline(d, Pipeline{{DeriveOp{"b", parseExpr("b + 1")}}}); }), ErrorKind::Schema);
    EXPECT_EQ(kindOf([&] { executePipeline(d, Pipeline{{NormalizeOp{"a", "p"}}}); }), ErrorKind::Schema);
    EXPECT_EQ(kindOf([&] { executePipeline(d, Pipeline{{FilterOp{parseExpr("b + 1")}}}); }), ErrorKind::Schema);
    EXPECT_EQ(kindOf([&] { executePipeline(d, Pipeline{{BinningOp{"b", 0, "x"}}}); }), ErrorKind::Schema);
}

TEST(ExecutePipeline, NullSemantics) {
    Table d(abSchema(), {{Value{"A"}, Value{}}, {Value{"A"}, Value{2.0}}, {Value{"B"}, Value{}}});
    auto p = executePipeline(d, Pipeline{{GroupAggregateOp{
                                    {"a"},
                                    {{AggFn::Sum, "b", "s"}, {AggFn::Count, "", "n"}, {AggFn::Avg, "b", "m"}}}}});
    EXPECT_EQ(p.at(0, "s"), Value{2.0});
    EXPECT_EQ(p.at(0, "n"), Value{2.0}); // count counts rows
    EXPECT_EQ(p.at(0, "m"), Value{2.0});
    EXPECT_TRUE(isNull(p.at(1, "m")));
    auto f = executePipeline(d, Pipeline{{FilterOp{parseExpr("b > 0 or b <= 0")}}});
    EXPECT_EQ(f.rowCount(), 1u);
}

TEST(ExecutePipeline, BinSortLimitFilterDerive) {
    auto d = ab({{"A", 7}, {"B", 3}, {"C", 12}, {"D", 5}});
    auto p = executePipeline(d, Pipeline{{FilterOp{parseExpr("a != 'D'")}, DeriveOp{"twice", parseExpr("b * 2")},
                                          BinningOp{"b", 5, "bin"}, SortOp{{{"b", true}}}, LimitOp{2},
                                          ProjectOp{{"a", "bin", "twice"}}}});
    Table expected(Schema({{"a", ValueType::Text}, {"bin", ValueType::Number}, {"twice", ValueType::Number}}),
                   {{Value{"C"}, Value{10.0}, Value{24.0}}, {Value{"A"}, Value{5.0}, Value{14.0}}});
    EXPECT_TRUE(tablesEqual(p, expected, 0.0));
    EXPECT_EQ(p.rows()[0][0], Value{"C"});
}

TEST(ExecutePipeline, GlobalAggregateOverEmptyTable) {
    auto p = executePipeline(ab({}), Pipeline{{GroupAggregateOp{{}, {{AggFn::Count, "", "n"}}}}});
    ASSERT_EQ(p.rowCount(), 1u);
    EXPECT_EQ(p.rows()[0][0], Value{0.0});
}

// ─── canonicalize / tablesEqual ─────────────────────────────────────────

TEST(Canonicalize, SortsRowsAndKeepsDuplicates) {
    EXPECT_EQ(canonicalize(ab({{"B", 2}, {"A", 1}})).rows(), ab({{"A", 1}, {"B", 2}}).rows());
    EXPECT_TRUE(canonicalize(ab({})).empty());
    EXPECT_EQ(canonicalize(ab({{"A", 1}, {"A", 1}})).rowCount(), 2u);
}

TEST(TablesEqual, Examples) {
    EXPECT_TRUE(tablesEqual(ab({{"A", 1}}), ab({{"A", 1}}), 0.0));
    EXPECT_TRUE(tablesEqual(ab({{"A", 1.0}}), ab({{"A", 1.0 + 1e-12}}), 1e-9));
    EXPECT_FALSE(tablesEqual(ab({{"A", 1}}), ab({{"A", 2}}), 1e-9));
    EXPECT_TRUE(tablesEqual(ab({{"A", 1e6}}), ab({{"A", 1e6 + 1e-4}}), 1e-9));
    EXPECT_FALSE(tablesEqual(ab({{"A", 1}}), ab({{"A", 1}, {"A", 1}}), 1e-9));
}

// ─── Properties ─────────────────────────────────────────────────────────

TEST(TableProperties, PurityAndDeterminism) {
    gen::Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        auto d = gen::groupValueTable(rng, 1, 8, true, 1, 9);
        auto copy = d;
        auto p1 = executePipeline(d, pieChartPipeline());
        auto p2 = executePipeline(d, pieChartPipeline());
        EXPECT_EQ(d.rows(), copy.rows());
        EXPECT_EQ(p1.rows(), p2.rows());
    }
}

TEST(TableProperties, NormalizeSumsToOne) {
    gen::Rng rng(12);
    for (int i = 0; i < 500; ++i) {
        auto d = gen::groupValueTable(rng, 1, 8, false, 0, 100);
        auto p = executePipeline(d, Pipeline{{NormalizeOp{"b", "p"}}});
        double s = 0;
        for (const auto& v : p.column("p")) s += std::get<double>(v);
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(TableProperties, StackDestackRoundTrip) {
    gen::Rng rng(13);
    for (int i = 0; i < 1000; ++i) {
        auto d = gen::groupValueTable(rng, 0, 8, rng.coin(), -5, 20);
        auto p = executePipeline(d, Pipeline{{StackOp{"b", {"a"}, "lo", "hi"}}});
        for (std::size_t r = 0; r < p.rowCount(); ++r)
            EXPECT_NEAR(std::get<double>(p.at(r, "hi")) - std::get<double>(p.at(r, "lo")),
                        std::get<double>(p.at(r, "b")), 1e-9);
        auto sorted = executePipeline(p, Pipeline{{SortOp{{{"a", false}}}}});
        double prev = 0;
        for (std::size_t r = 0; r < sorted.rowCount(); ++r) {
            double hi = std::get<double>(sorted.at(r, "hi"));
            EXPECT_NEAR(hi - prev, std::get<double>(sorted.at(r, "b")), 1e-9);
            prev = hi;
        }
    }
}

TEST(TableProperties, CountsSumToCardinality) {
    gen::Rng rng(14);
    for (int i = 0; i < 300; ++i) {
        auto d = gen::groupValueTable(rng, 0, 8);
        auto p = executePipeline(d, Pipeline{{GroupAggregateOp{{"a"}, {{AggFn::Count, "", "n"}}}}});
        double total = 0;
        for (const auto& v : p.column("n")) total += std::get<double>(v);
        EXPECT_EQ(total, static_cast<double>(d.rowCount()));
    }
}

TEST(TableProperties, TablesEqualIsSymmetricAndReflexive) {
    gen::Rng rng(15);
    for (int i = 0; i < 300; ++i) {
        auto t1 = gen::groupValueTable(rng, 0, 4, rng.coin());
        auto t2 = gen::groupValueTable(rng, 0, 4, rng.coin());
        double eps = rng.coin() ? 0.0 : rng.real(0, 0.5);
        EXPECT_TRUE(tablesEqual(t1, t1, 0.0));
        EXPECT_EQ(tablesEqual(t1, t2, eps), tablesEqual(t2, t1, eps));
        // Row order never matters.
        auto rows = t1.rows();
        std::reverse(rows.begin(), rows.end());
        EXPECT_TRUE(tablesEqual(t1, Table(t1.schema(), rows), 0.0));
    }
}
