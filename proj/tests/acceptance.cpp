// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "vizproxy/cli.hpp"
#include "vizproxy/vizproxy.hpp"

#include "support/files.hpp"
#include "support/gen.hpp"
#include "support/reference.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

using namespace vizproxy;
using vizproxy::testing::fixtureSpec;
using vizproxy::testing::fixtureTask;

namespace {

const std::vector<std::string> galleryNames = {"scatter", "bar", "pie", "propStacked"};
const std::vector<std::string> abTasks = {"percA", "percB", "countby", "percAB", "diffBC",
                                          "readbar", "readpoint", "sumby", "avgby", "total", "rowcount"};

/// Collects failure notes; a criterion passes when none were recorded.
struct Check {
    std::vector<std::string> notes;
    void expect(bool ok, const std::string& what) {
        if (!ok) notes.push_back(what);
    }
};

double num(const Value& v) { return std::get<double>(v); }

Table teaser() {
    Schema s({{"a", ValueType::Text}, {"b", ValueType::Number}});
    return Table(s, {{Value{"A"}, Value{1.0}}, {Value{"A"}, Value{2.0}}, {Value{"B"}, Value{3.0}}, {Value{"C"}, Value{2.0}}});
}

DatasetFamily familyFor(const TaskQuery& q) { return {q.input, {"A", "B", "C"}, 1, 8, 0, 9, 11, false}; }

void galleryFidelity(Check& c) {
    const double eps = 1e-9;
    auto d = teaser();
    auto pairs = gen::pairsOf(d);

    auto scatter = executePipeline(d, gallerySpec("scatter").pipeline);
    c.expect(tablesEqual(scatter, d, 0), "scatter P differs from D");

    auto bar = executePipeline(d, gallerySpec("bar").pipeline);
    auto groups = reference::aggregate(pairs);
    c.expect(bar.rowCount() == groups.size(), "bar row count");
    for (const auto& g : groups)
        for (std::size_t r = 0; r < bar.rowCount(); ++r)
            if (std::get<std::string>(bar.at(r, "a")) == g.key)
                c.expect(std::abs(num(bar.at(r, "c")) - g.sum) <= eps, "bar sum for " + g.key);

    auto segments = reference::stackedPercentages(pairs);
    for (const char* name : {"pie", "propStacked"}) {
        auto p = executePipeline(d, gallerySpec(name).pipeline);
        double sum = 0, top = 0;
        c.expect(p.rowCount() == segments.size(), std::string(name) + " row count");
        for (std::size_t r = 0; r < p.rowCount(); ++r) {
            sum += num(p.at(r, "perc"));
            top = std::max(top, num(p.at(r, "d")));
            const auto& key = std::get<std::string>(p.at(r, "a"));
            for (const auto& s : segments)
                if (s.key == key) {
                    c.expect(std::abs(num(p.at(r, "perc")) - s.perc) <= eps, std::string(name) + " perc " + key);
                    c.expect(std::abs(num(p.at(r, "d0")) - s.lower) <= eps, std::string(name) + " d0 " + key);
                    c.expect(std::abs(num(p.at(r, "d")) - s.upper) <= eps, std::string(name) + " d " + key);
                }
        }
        c.expect(std::abs(sum - 1) <= eps, std::string(name) + " percentages sum to " + std::to_string(sum));
        c.expect(std::abs(top - 1) <= eps, std::string(name) + " stack ends at " + std::to_string(top));
    }
}

void workedExamples(Check& c) {
    auto pie = analyze(fixtureTask("percA"), gallerySpec("pie"));
    c.expect(pie.verdict.kind == VerdictKind::Precomputed, "pie x percA: " + pie.verdict.describe());

    auto bar = analyze(fixtureTask("countby"), gallerySpec("bar"));
    c.expect(bar.verdict.kind == VerdictKind::Impossible, "bar x countby: " + bar.verdict.describe());

    bool allDerivable = true;
    for (const auto& t : abTasks) allDerivable &= analyze(fixtureTask(t), gallerySpec("scatter")).verdict.kind == VerdictKind::Derivable;
    c.expect(allDerivable, "scatter is not Derivable for every fixture task");

    auto stack = analyze(fixtureTask("percB"), gallerySpec("propStacked"));
    c.expect(stack.verdict.kind == VerdictKind::Adverse && stack.verdict.inversions == std::vector<std::string>{"InvertStack"},
             "propStacked x percB: " + stack.verdict.describe());

    for (const char* name : {"pie", "propStacked"}) {
        auto p = analyze(fixtureTask("percAB"), gallerySpec(name));
        std::size_t sums = 0, reads = 0;
        for (const auto& op : p.ops) {
            sums += op.kind == ProxyOpKind::SumK;
            reads += op.kind == ProxyOpKind::ReadValue;
        }
        bool twoInputs = false;
        for (const auto& op : p.ops)
            if (op.kind == ProxyOpKind::SumK) twoInputs = op.inputs.size() == 2;
        c.expect(p.verdict.answerable() && sums == 1 && twoInputs && reads >= 2,
                 std::string(name) + " x percAB: " + p.describe());
    }

    auto counts = analyze(fixtureTask("avg_v_by_g"), fixtureSpec("group_counts"));
    c.expect(counts.verdict.kind == VerdictKind::Impossible, "group_counts x avg: " + counts.verdict.describe());
}

std::size_t oracleSoundness(Check& c) {
    std::size_t pairs = 0;
    for (const auto& s : galleryNames)
        for (const auto& t : abTasks) {
            auto q = fixtureTask(t);
            auto spec = gallerySpec(s);
            auto plan = analyze(q, spec);
            if (!plan.verdict.answerable()) continue;
            ++pairs;
            auto v = verifyProxy(q, spec, plan, familyFor(q), 1000, 1e-9);
            c.expect(v.trials == 1000, s + " x " + t + " ran " + std::to_string(v.trials) + " trials");
            c.expect(v.failures.empty(), s + " x " + t + ": " + std::to_string(v.failures.size()) + " failures");
            c.expect(v.skipped < v.trials, s + " x " + t + ": every trial skipped");
        }
    return pairs;
}

void impossibilityWitnesses(Check& c) {
    struct Case {
        VisSpec spec;
        TaskQuery q;
        DatasetFamily family;
    };
    auto countby = fixtureTask("countby");
    auto avg = fixtureTask("avg_v_by_g");
    std::vector<Case> cases = {{gallerySpec("bar"), countby, familyFor(countby)},
                               {fixtureSpec("group_counts"), avg, {avg.input, {"A", "B", "C"}, 1, 8, 0, 9, 11, false}}};
    for (const auto& k : cases) {
        auto plan = analyze(k.q, k.spec);
        c.expect(!plan.verdict.answerable(), k.spec.name + " unexpectedly answerable");
        auto w = searchCounterexample(k.q, k.spec, k.family, 10000);
        if (!w) {
            c.expect(false, k.spec.name + ": no witness within 10000 candidates");
            continue;
        }
        c.expect(w->candidates <= 10000, k.spec.name + " exceeded the budget");
        c.expect(certifyCounterexample(k.q, k.spec, w->d1, w->d2, true, k.family.distinctBeyond(1e-9)),
                 k.spec.name + " witness does not certify");
        if (plan.verdict.reason == "count-from-sum")
            c.expect(w->construction == "merge-rows" && w->candidates == 1,
                     "count-from-sum witness came from " + w->construction + " after " + std::to_string(w->candidates));
    }
}

void classifierGoldens(Check& c) {
    AnalysisOptions kt;
    kt.knownTotal = true;
    struct Golden {
        std::string a, b, task;
        AnalysisOptions options;
        std::string expected;
    };
    const std::vector<Golden> goldens = {{"scatter", "bar", "readpoint", {}, "Inappropriate(bar)"},
                                         {"pie", "propStacked", "diffBC", {}, "MeasuresEncoding"},
                                         {"bar", "propStacked", "readbar", kt, "MeasuresTransformation"},
                                         {"bar", "pie", "readbar", kt, "Confounded"}};
    for (const auto& g : goldens) {
        auto got = classifyComparison(gallerySpec(g.a), gallerySpec(g.b), fixtureTask(g.task), g.options);
        c.expect(got.classification.describe() == g.expected,
                 g.a + "/" + g.b + ": " + got.classification.describe() + " != " + g.expected);
    }
    gen::Rng rng(2024);
    auto perturb = [&](VisSpec s) {
        for (auto& [ch, b] : s.encoding.bindings) {
            double lo = rng.real(-500, 500);
            b.scale = b.scale.withRange(lo, lo + (rng.coin() ? 1 : -1) * rng.real(1, 800));
        }
        return s;
    };
    for (int i = 0; i < 200; ++i) {
        const auto& g = goldens[static_cast<std::size_t>(i) % goldens.size()];
        auto got = classifyComparison(perturb(gallerySpec(g.a)), perturb(gallerySpec(g.b)), fixtureTask(g.task), g.options);
        c.expect(got.classification.describe() == g.expected, "perturbation " + std::to_string(i) + " changed " + g.a + "/" + g.b);
    }
}

void costOrdinals(Check& c) {
    auto profile = defaultProfile();
    auto cost = [&](const std::string& spec, const std::string& task, const AnalysisOptions& o = {}) {
        return costPlan(analyze(fixtureTask(task), gallerySpec(spec), o), profile).total;
    };
    double pie = cost("pie", "percA"), bar = cost("bar", "percA"), scatter = cost("scatter", "percA");
    c.expect(pie < bar && bar < scatter, "percA costs pie " + std::to_string(pie) + ", bar " + std::to_string(bar) +
                                             ", scatter " + std::to_string(scatter));
    AnalysisOptions domain;
    domain.groupDomain = {{"a", {Value{"A"}, Value{"B"}, Value{"C"}}}};
    double stackFirst = cost("propStacked", "percA", domain);
    c.expect(std::abs(cost("pie", "percA", domain) - stackFirst) <= 1e-12,
             "first-segment lookup: pie " + std::to_string(pie) + " vs propStacked " + std::to_string(stackFirst));

    auto specs = gallery();
    auto order = [&](const TaskQuery& q, const ExpertiseProfile& p) {
        std::vector<std::string> names;
        for (const auto& e : rankVisualizations(q, specs, p)) names.push_back(e.spec);
        return names;
    };
    gen::Rng rng(77);
    for (int i = 0; i < 200; ++i) {
        auto q = fixtureTask(rng.pick(abTasks));
        double k = std::exp(rng.real(std::log(1e-3), std::log(1e3)));
        auto scaled = profile;
        for (auto& [kind, u] : scaled.base.unitCosts) u *= k;
        scaled.base.perValueScanCost *= k;
        c.expect(order(q, profile) == order(q, scaled), "scaling by " + std::to_string(k) + " reordered " + q.source);
    }
}

void flexibility(Check& c) {
    auto ab = galleryInputSchema();
    auto t3 = enumerateTaskSet(standardTaskSet("T3", ab), ab, {{"a", {"A", "B", "C"}}});
    c.expect(t3.size() == 6, "T3 has " + std::to_string(t3.size()) + " tasks");
    std::map<std::string, double> share;
    for (const auto& s : galleryNames) {
        auto r = flexibilityReport(gallerySpec(s), t3);
        c.expect(r.coverage == 1.0, s + " T3 coverage " + std::to_string(r.coverage));
        share[s] = r.meanResidualShare.value_or(-1);
    }
    c.expect(share["pie"] < share["bar"] && share["bar"] < share["scatter"],
             "residual shares pie " + std::to_string(share["pie"]) + ", bar " + std::to_string(share["bar"]) +
                 ", scatter " + std::to_string(share["scatter"]));
    std::vector<TaskQuery> countOnly = {fixtureTask("countby")};
    for (const auto& s : galleryNames) {
        double want = s == "scatter" ? 1.0 : 0.0;
        double got = flexibilityReport(gallerySpec(s), countOnly).coverage;
        c.expect(got == want, s + " countby coverage " + std::to_string(got));
    }
}

void roundTrips(Check& c) {
    gen::Rng rng(8);
    int decoded = 0, stacked = 0;
    for (int i = 0; i < 1000; ++i) {
        auto [p, e] = gen::randomEncoded(rng);
        auto back = decodeMarks(encode(p, e), e);
        std::vector<std::string> names;
        for (const auto& col : back.schema().columns()) names.push_back(col.name);
        auto readable = project(p, names);
        if (tablesEqual(back, readable, 1e-9)) ++decoded;
        else c.expect(false, "decode mismatch at table " + std::to_string(i));
    }
    for (int i = 0; i < 1000; ++i) {
        auto d = gen::groupValueTable(rng, 0, 8, rng.coin(), -5, 20);
        auto p = executePipeline(d, Pipeline{{StackOp{"b", {"a"}, "lo", "hi"}}});
        auto sorted = executePipeline(p, Pipeline{{SortOp{{{"a", false}}}}});
        bool ok = true;
        double prev = 0;
        for (std::size_t r = 0; r < sorted.rowCount(); ++r) {
            double lo = num(sorted.at(r, "lo")), hi = num(sorted.at(r, "hi")), b = num(sorted.at(r, "b"));
            ok &= std::abs(hi - lo - b) <= 1e-9 && std::abs(hi - prev - b) <= 1e-9;
            prev = hi;
        }
        if (ok) ++stacked;
        else c.expect(false, "destack mismatch at table " + std::to_string(i));
    }
    c.expect(decoded == 1000 && stacked == 1000, "round trips " + std::to_string(decoded) + "/" + std::to_string(stacked));
}

void determinism(Check& c) {
    const std::string S = "fixtures/specs/", T = "fixtures/tasks/";
    std::vector<std::string> gal;
    for (const auto& n : galleryNames) gal.push_back(S + n + ".json");
    std::vector<std::vector<std::string>> commands = {
        {"analyze", "--spec", S + "pie.json", "--task", T + "percA.task"},
        {"verify", "--spec", S + "bar.json", "--task", T + "countby.task", "--seed", "3"},
        {"verify", "--spec", S + "propStacked.json", "--task", T + "percB.task", "--seed", "3", "--data",
         "fixtures/data/teaser.csv"},
        {"cost", "--spec", S + "bar.json", "--task", T + "percA.task", "--profile", "profiles/expert.json"},
        {"compare", "--a", S + "bar.json", "--b", S + "pie.json", "--task", T + "readbar.task", "--assume", "known-total"},
        {"gallery"},
        {"render", "--spec", S + "pie.json", "--data", "fixtures/data/teaser.csv"},
    };
    auto rank = std::vector<std::string>{"rank", "--task", T + "percA.task", "--specs"};
    rank.insert(rank.end(), gal.begin(), gal.end());
    commands.push_back(rank);
    auto flex = std::vector<std::string>{"flexibility", "--taskset", "T3", "--domain", "A,B,C", "--spec"};
    flex.insert(flex.end(), gal.begin(), gal.end());
    commands.push_back(flex);
    for (const auto& args : commands) {
        auto first = runCommand(args), second = runCommand(args);
        c.expect(first.exitCode == 0, args[0] + " exited " + std::to_string(first.exitCode) + ": " + first.err);
        c.expect(!first.out.empty() && first.out == second.out, args[0] + " output differs between runs");
    }
}

} // namespace

int main() {
    struct Criterion {
        int id;
        std::string name;
        std::string tolerance;
        std::function<std::string(Check&)> run;
        double budgetSeconds = 0; // 0: no runtime bound
    };
    auto quiet = [](void (*f)(Check&)) { return [f](Check& c) { f(c); return std::string(); }; };
    std::vector<Criterion> criteria = {
        {1, "gallery fidelity", "1e-9", quiet(galleryFidelity), 1},
        {2, "worked-example matrix", "exact", quiet(workedExamples)},
        {3, "oracle soundness", "eps 1e-9, 1000 trials",
         [](Check& c) { return std::to_string(oracleSoundness(c)) + " answerable pairs"; }, 60},
        {4, "impossibility witnesses", "budget 10000", quiet(impossibilityWitnesses)},
        {5, "classifier goldens", "exact, 200 perturbations", quiet(classifierGoldens)},
        {6, "cost-model ordinal claims", "exact, 200 scalings", quiet(costOrdinals)},
        {7, "flexibility report", "exact", quiet(flexibility)},
        {8, "round-trip invariants", "1e-9, 1000+1000 tables", quiet(roundTrips)},
        {9, "CLI determinism", "byte-identical", quiet(determinism)},
    };
    int failed = 0;
    for (const auto& k : criteria) {
        Check c;
        std::string detail;
        auto start = std::chrono::steady_clock::now();
        try {
            detail = k.run(c);
        } catch (const std::exception& e) {
            c.notes.push_back(std::string("threw: ") + e.what());
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (k.budgetSeconds > 0 && secs >= k.budgetSeconds)
            c.notes.push_back("took " + std::to_string(secs) + " s, bound " + std::to_string(k.budgetSeconds) + " s");
        bool ok = c.notes.empty();
        failed += !ok;
        std::printf("%s  [%d] %-26s tol %-26s %8.3f s%s%s\n", ok ? "PASS" : "FAIL", k.id, k.name.c_str(),
                    k.tolerance.c_str(), secs, detail.empty() ? "" : "  ", detail.c_str());
        for (std::size_t i = 0; i < c.notes.size() && i < 10; ++i) std::printf("        - %s\n", c.notes[i].c_str());
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
