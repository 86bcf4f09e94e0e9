#pragma once

#include "vizproxy/classify.hpp"
#include "vizproxy/cost.hpp"
#include "vizproxy/csv.hpp"
#include "vizproxy/encode.hpp"
#include "vizproxy/gallery.hpp"
#include "vizproxy/oracle.hpp"
#include "vizproxy/rank.hpp"
#include "vizproxy/rewrite.hpp"
#include "vizproxy/svg.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#ifndef VIZPROXY_VERSION
#define VIZPROXY_VERSION "0.0.0"
#endif

namespace vizproxy {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int invalid = 2;
inline constexpr int unknown = 3;
inline constexpr int disagreement = 4;
} // namespace exit_code

struct CommandOutput {
    int exitCode = exit_code::ok;
    std::string out; // report or SVG
    std::string err; // one diagnostic line, empty on success
};

/// Exit code for a finished oracle run: any failed trial is a disagreement.
inline int verificationExitCode(const VerificationResult& v) {
    return v.passed() ? exit_code::ok : exit_code::disagreement;
}

inline std::string versionString() { return std::string("vizproxy ") + VIZPROXY_VERSION; }

inline std::string sha256Hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        fail(ErrorKind::Harness, "sha256 digest failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

namespace detail {

/// Command-level failure that is not a library error: bad flag values, unreadable files.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Inputs {
public:
    std::string read(const std::string& role, const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw UsageError("cannot read " + role + " file " + path);
        std::ostringstream os;
        os << in.rdbuf();
        auto text = os.str();
        OrderedJson e;
        e["role"] = role;
        e["path"] = path;
        e["sha256"] = sha256Hex(text);
        digests_.push_back(std::move(e));
        return text;
    }

    VisSpec spec(const std::string& path, const std::string& role = "spec") {
        auto s = parseSpec(read(role, path));
        checkSpec(s);
        return s;
    }
    TaskQuery task(const std::string& path) { return parseTask(read("task", path)); }

    OrderedJson json() const {
        OrderedJson j = OrderedJson::array();
        for (const auto& d : digests_) j.push_back(d);
        return j;
    }

private:
    std::vector<OrderedJson> digests_;
};

/// `col=v1,v2` or a bare `v1,v2` applied to the first text column of `input`.
inline std::map<std::string, std::vector<Value>> parseDomains(const std::vector<std::string>& flags, const Schema& input) {
    std::map<std::string, std::vector<Value>> out;
    for (const auto& f : flags) {
        std::string col, list = f;
        if (auto eq = f.find('='); eq != std::string::npos) {
            col = f.substr(0, eq);
            list = f.substr(eq + 1);
        } else {
            for (const auto& c : input.columns())
                if (c.type == ValueType::Text) {
                    col = c.name;
                    break;
                }
            if (col.empty()) throw UsageError("--domain " + f + ": input has no text column");
        }
        if (!input.indexOf(col)) throw UsageError("--domain names unknown column " + col);
        std::vector<Value> vals;
        std::stringstream ss(list);
        for (std::string v; std::getline(ss, v, ',');)
            if (!v.empty()) vals.push_back(Value{v});
        if (vals.empty()) throw UsageError("--domain " + f + " lists no values");
        out[col] = std::move(vals);
    }
    return out;
}

inline std::vector<std::string> textValues(const std::vector<Value>& vs) {
    std::vector<std::string> out;
    for (const auto& v : vs) out.push_back(toString(v));
    return out;
}

inline OrderedJson workSplitToJson(const WorkSplit& w) {
    OrderedJson j;
    j["precomputedSteps"] = w.precomputedSteps;
    j["residualOps"] = w.residualOps;
    j["residualShare"] = w.residualShare;
    return j;
}

inline OrderedJson flexibilityToJson(const std::string& spec, const FlexibilityReport& r) {
    OrderedJson j;
    j["spec"] = spec;
    j["coverage"] = r.coverage;
    j["meanResidualShare"] = r.meanResidualShare ? OrderedJson(*r.meanResidualShare) : OrderedJson(nullptr);
    j["tasks"] = OrderedJson::array();
    for (const auto& e : r.entries) {
        OrderedJson t;
        t["task"] = e.task;
        t["verdict"] = verdictToJson(e.plan.verdict);
        t["residualShare"] = e.residualShare ? OrderedJson(*e.residualShare) : OrderedJson(nullptr);
        j["tasks"].push_back(std::move(t));
    }
    return j;
}

/// Human-readable rendering: one `path  value` line per JSON leaf.
inline void flatten(const OrderedJson& j, const std::string& path, std::vector<std::pair<std::string, std::string>>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) flatten(v, path.empty() ? k : path + "." + k, out);
    } else if (j.is_array() && !j.empty()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], path + "[" + std::to_string(i) + "]", out);
    } else {
        out.emplace_back(path, j.is_string() ? j.get<std::string>() : j.dump());
    }
}

inline std::string prettyText(const OrderedJson& report) {
    std::vector<std::pair<std::string, std::string>> rows;
    flatten(report, "", rows);
    std::size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.first.size());
    std::ostringstream os;
    for (const auto& [k, v] : rows) os << std::left << std::setw(static_cast<int>(width) + 2) << k << v << "\n";
    return os.str();
}

inline std::string oneLine(std::string s) {
    for (auto& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
}

struct Flags {
    std::string spec, task, data, profile, a, b, taskset;
    std::vector<std::string> specs, domains, assume;
    bool dataLevel = false, pretty = false;
    std::uint64_t seed = 1;
    std::size_t trials = 1000, budget = 10000;
};

} // namespace detail

/// Runs one subcommand. `args` excludes the program name.
inline CommandOutput runCommand(const std::vector<std::string>& args) {
    using namespace detail;
    Flags fl;
    CLI::App app{"Static analysis of what a chart lets a reader compute", "vizproxy"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", versionString());

    auto common = [&](CLI::App* c) {
        c->add_flag("--pretty", fl.pretty, "Human-readable key/value listing instead of JSON");
    };
    auto analysisFlags = [&](CLI::App* c) {
        c->add_option("--assume", fl.assume, "Analysis assumption")->check(CLI::IsMember({"known-total"}));
        c->add_flag("--data-level", fl.dataLevel, "Allow reading every prepared column, not only encoded ones");
        c->add_option("--domain", fl.domains, "Known ordered domain, as col=v1,v2 or v1,v2");
    };

    auto* analyzeCmd = app.add_subcommand("analyze", "Verdict and proxy plan for one chart and task");
    analyzeCmd->add_option("--spec", fl.spec)->required();
    analyzeCmd->add_option("--task", fl.task)->required();
    analysisFlags(analyzeCmd);
    common(analyzeCmd);

    auto* verifyCmd = app.add_subcommand("verify", "Analyze, then check the verdict against sampled data");
    verifyCmd->add_option("--spec", fl.spec)->required();
    verifyCmd->add_option("--task", fl.task)->required();
    verifyCmd->add_option("--data", fl.data, "Also compare task and plan on this CSV");
    verifyCmd->add_option("--seed", fl.seed);
    verifyCmd->add_option("--trials", fl.trials);
    verifyCmd->add_option("--budget", fl.budget)->check(CLI::PositiveNumber);
    analysisFlags(verifyCmd);
    common(verifyCmd);

    auto* costCmd = app.add_subcommand("cost", "Analyze and price the plan under a profile");
    costCmd->add_option("--spec", fl.spec)->required();
    costCmd->add_option("--task", fl.task)->required();
    costCmd->add_option("--profile", fl.profile);
    analysisFlags(costCmd);
    common(costCmd);

    auto* rankCmd = app.add_subcommand("rank", "Order charts by the cost of answering one task");
    rankCmd->add_option("--task", fl.task)->required();
    rankCmd->add_option("--specs", fl.specs)->required()->expected(1, -1);
    rankCmd->add_option("--profile", fl.profile);
    analysisFlags(rankCmd);
    common(rankCmd);

    auto* compareCmd = app.add_subcommand("compare", "Classify what comparing two charts on a task measures");
    compareCmd->add_option("--a", fl.a)->required();
    compareCmd->add_option("--b", fl.b)->required();
    compareCmd->add_option("--task", fl.task)->required();
    analysisFlags(compareCmd);
    common(compareCmd);

    auto* flexCmd = app.add_subcommand("flexibility", "Coverage and residual work over a task set");
    flexCmd->add_option("--spec", fl.specs)->required()->expected(1, -1);
    flexCmd->add_option("--taskset", fl.taskset, "T1..T4, or a file with one task per line")->required();
    analysisFlags(flexCmd);
    common(flexCmd);

    auto* galleryCmd = app.add_subcommand("gallery", "Emit the four basic chart specs");
    common(galleryCmd);

    auto* renderCmd = app.add_subcommand("render", "Debug SVG of a chart over a CSV");
    renderCmd->add_option("--spec", fl.spec)->required();
    renderCmd->add_option("--data", fl.data)->required();

    std::vector<std::string> argvStore{"vizproxy"};
    argvStore.insert(argvStore.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argvStore) argv.push_back(s.data());

    CommandOutput res;
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        res.out = app.help();
        return res;
    } catch (const CLI::CallForAllHelp&) {
        res.out = app.help("", CLI::AppFormatMode::All);
        return res;
    } catch (const CLI::CallForVersion&) {
        res.out = versionString() + "\n";
        return res;
    } catch (const CLI::ParseError& e) {
        res.exitCode = exit_code::invalid;
        res.err = "vizproxy: " + oneLine(e.what());
        return res;
    }

    Inputs inputs;
    OrderedJson report;
    report["version"] = versionString();
    report["command"] = args;

    auto optionsFor = [&](const Schema& input) {
        AnalysisOptions o;
        o.viewLevel = !fl.dataLevel;
        o.knownTotal = !fl.assume.empty();
        o.groupDomain = parseDomains(fl.domains, input);
        return o;
    };
    auto loadProfile = [&]() {
        auto p = fl.profile.empty() ? defaultProfile() : parseProfile(inputs.read("profile", fl.profile));
        validateProfile(p);
        return p;
    };

    try {
        OrderedJson result;
        AnalysisOptions opts;
        if (analyzeCmd->parsed() || verifyCmd->parsed() || costCmd->parsed()) {
            auto spec = inputs.spec(fl.spec);
            auto q = inputs.task(fl.task);
            opts = optionsFor(q.input);
            auto plan = analyze(q, spec, opts);
            result["spec"] = spec.name;
            result["task"] = q.source;
            result["plan"] = planToJson(plan);
            if (analyzeCmd->parsed() && plan.verdict.answerable()) result["workSplit"] = workSplitToJson(workSplitOf(plan));
            if (costCmd->parsed()) {
                auto profile = loadProfile();
                result["profile"] = profile.name;
                result["cost"] = plan.verdict.answerable() ? costToJson(costPlan(plan, profile), plan) : OrderedJson("inf");
            }
            if (verifyCmd->parsed()) {
                DatasetFamily family = galleryFamily(fl.seed);
                family.schema = q.input;
                if (auto it = opts.groupDomain.begin(); it != opts.groupDomain.end())
                    family.groupDomain = textValues(it->second);
                family.validate();
                OrderedJson oracle;
                oracle["seed"] = fl.seed;
                if (plan.verdict.answerable()) {
                    auto v = verifyProxy(q, spec, plan, family, fl.trials, 1e-9);
                    oracle["status"] = v.passed() ? "agree" : "disagree";
                    oracle["verification"] = verificationToJson(v);
                    res.exitCode = std::max(res.exitCode, verificationExitCode(v));
                } else {
                    auto c = searchCounterexample(q, spec, family, fl.budget, plan.viewLevel);
                    oracle["budget"] = fl.budget;
                    oracle["status"] = c ? "agree" : "unconfirmed";
                    oracle["counterexample"] = c ? counterexampleToJson(*c) : OrderedJson(nullptr);
                }
                if (!fl.data.empty()) {
                    auto d = loadCsv(inputs.read("data", fl.data), q.input);
                    OrderedJson onData;
                    auto expected = evaluateTask(q, d);
                    onData["expected"] = resultToJson(expected);
                    if (plan.verdict.answerable()) {
                        auto view = visibleTable(spec, executePipeline(d, spec.pipeline), plan.viewLevel);
                        auto got = executePlan(plan, view, PlanContext::fromData(d));
                        onData["got"] = resultToJson(got);
                        bool agree = resultsClose(expected, got, 1e-9);
                        onData["agree"] = agree;
                        if (!agree) res.exitCode = exit_code::disagreement;
                    }
                    oracle["data"] = std::move(onData);
                }
                result["oracle"] = std::move(oracle);
            }
        } else if (rankCmd->parsed()) {
            auto q = inputs.task(fl.task);
            opts = optionsFor(q.input);
            std::vector<VisSpec> specs;
            for (const auto& p : fl.specs) specs.push_back(inputs.spec(p));
            auto profile = loadProfile();
            result["task"] = q.source;
            result["profile"] = profile.name;
            result["ranking"] = rankingToJson(rankVisualizations(q, specs, profile, opts));
        } else if (compareCmd->parsed()) {
            auto a = inputs.spec(fl.a, "a");
            auto b = inputs.spec(fl.b, "b");
            auto q = inputs.task(fl.task);
            opts = optionsFor(q.input);
            result["task"] = q.source;
            result["comparison"] = comparisonToJson(classifyComparison(a, b, q, opts));
        } else if (flexCmd->parsed()) {
            std::vector<VisSpec> specs;
            for (const auto& p : fl.specs) specs.push_back(inputs.spec(p));
            const Schema& input = specs.front().input;
            for (const auto& s : specs)
                if (!(s.input == input)) throw UsageError("flexibility specs must share one input schema");
            opts = optionsFor(input);
            Domains domains;
            for (const auto& [col, vals] : opts.groupDomain) domains[col] = textValues(vals);
            std::vector<TaskQuery> tasks;
            if (fl.taskset.size() == 2 && fl.taskset[0] == 'T' && std::isdigit(static_cast<unsigned char>(fl.taskset[1]))) {
                tasks = enumerateTaskSet(standardTaskSet(fl.taskset, input), input, domains);
            } else {
                std::stringstream lines(inputs.read("taskset", fl.taskset));
                for (std::string line; std::getline(lines, line);) {
                    auto t = detail::trim(line);
                    if (!t.empty() && t[0] != '#') tasks.push_back(parseTask(t, input));
                }
            }
            result["taskset"] = fl.taskset;
            result["taskCount"] = tasks.size();
            result["reports"] = OrderedJson::array();
            for (const auto& s : specs) result["reports"].push_back(flexibilityToJson(s.name, flexibilityReport(s, tasks, opts)));
        } else if (galleryCmd->parsed()) {
            result["specs"] = OrderedJson::array();
            for (const auto& s : gallery()) result["specs"].push_back(specToJson(s));
        } else if (renderCmd->parsed()) {
            auto spec = inputs.spec(fl.spec);
            auto d = loadCsv(inputs.read("data", fl.data), spec.input);
            res.out = emitSvg(encode(executePipeline(d, spec.pipeline), spec.encoding));
            return res;
        }

        OrderedJson assumptions = OrderedJson::array();
        if (opts.knownTotal) assumptions.push_back("known-total");
        report["inputs"] = inputs.json();
        report["assumptions"] = std::move(assumptions);
        report["viewLevel"] = opts.viewLevel;
        report["result"] = std::move(result);
        res.out = fl.pretty ? prettyText(report) : report.dump() + "\n";
        return res;
    } catch (const Error& e) {
        res.exitCode = e.kind() == ErrorKind::Unknown ? exit_code::unknown : exit_code::invalid;
        res.err = "vizproxy: " + std::string(errorKindName(e.kind())) + ": " + oneLine(e.what());
    } catch (const UsageError& e) {
        res.exitCode = exit_code::invalid;
        res.err = "vizproxy: " + oneLine(e.what());
    } catch (const nlohmann::json::exception& e) {
        res.exitCode = exit_code::invalid;
        res.err = "vizproxy: " + oneLine(e.what());
    }
    res.out.clear();
    return res;
}

} // namespace vizproxy
