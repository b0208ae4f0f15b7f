#include "dynscreen/report.hpp"

#include "dynscreen/errors.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dynscreen {

using nlohmann::json;

namespace {

json distribution_json(const ScenarioDistribution& d) {
    return {{"weights", d.weights}, {"rates", d.rates}, {"no_fault", d.no_fault}};
}

ScenarioDistribution distribution_from(const json& j) {
    ScenarioDistribution d;
    d.weights = j.at("weights").get<std::vector<double>>();
    d.rates = j.at("rates").get<std::vector<double>>();
    d.no_fault = j.at("no_fault").get<double>();
    return d;
}

json optional_branch(const std::optional<std::size_t>& b) { return b ? json(*b) : json(nullptr); }

void write_atomic(const std::string& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path() && !fs::exists(target.parent_path()))
        throw Error("cannot write '" + path + "': directory does not exist");
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + path + "'");
        out << bytes;
        out.flush();
        if (!out) throw Error("short write to '" + path + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("cannot replace '" + path + "'");
    }
}

std::string csv_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

json report_to_json(const RiskReport& r) {
    json doc;
    doc["schema_version"] = r.schema_version;
    doc["metadata"] = {
        {"seed", r.seed},
        {"config_hash", r.config_hash},
        {"model", r.model},
        {"noise_scale", r.noise_scale},
        {"horizon", r.horizon},
        {"dt", r.dt},
        {"rate", r.rate},
        {"sampler", r.sampler},
        {"backend", r.backend},
        {"rule", std::string(to_string(r.rule))},
        {"buses", r.buses},
        {"branches", r.branches},
        {"samples", r.samples},
        {"evaluations", r.evaluations},
        {"ess", r.ess},
        {"degraded", r.degraded},
        {"warnings", r.warnings},
    };
    doc["policy"] = {{"t_star", r.policy.t_star},
                     {"warning_lower", r.policy.warning_lower},
                     {"emergency_above", r.policy.emergency_above}};
    doc["monitored"] = r.monitored;
    doc["transformer"] = r.transformer;

    json failures = json::array();
    for (const auto& f : r.failures) failures.push_back({{"sample", f.index}, {"reason", f.reason}});
    doc["failures"] = std::move(failures);

    json rows = json::array();
    const std::size_t m = r.monitored.size();
    for (std::size_t a = 0; a < r.branches; ++a) {
        json row = json::array();
        for (std::size_t e = 0; e < m; ++e) row.push_back(r.joint[a * m + e]);
        rows.push_back(std::move(row));
    }
    doc["joint"] = std::move(rows);

    json marginal = json::array();
    for (const auto& x : r.marginal)
        marginal.push_back({{"branch", x.branch},
                            {"probability", x.probability},
                            {"standard_error", x.standard_error},
                            {"mean_overload", x.mean_overload},
                            {"zone", std::string(to_string(x.zone))}});
    doc["marginal"] = std::move(marginal);

    json global = json::array();
    for (const auto& g : r.global)
        global.push_back({{"gamma", g.gamma},
                          {"probability", g.probability},
                          {"standard_error", g.standard_error},
                          {"ess", g.ess}});
    doc["global"] = std::move(global);

    json faulted = json::array();
    for (const auto& f : r.faulted_ranking)
        faulted.push_back({{"branch", f.branch}, {"probability", f.probability}, {"mean_overload", f.mean_overload}});
    doc["faulted_ranking"] = std::move(faulted);

    json vulnerable = json::array();
    for (const auto& v : r.vulnerability_ranking)
        vulnerable.push_back({{"branch", v.branch},
                              {"recurrences", v.recurrences},
                              {"probability", v.probability},
                              {"transformer", v.transformer}});
    doc["vulnerability_ranking"] = std::move(vulnerable);

    json top = json::array();
    for (const auto& s : r.top_scenarios)
        top.push_back({{"sample", s.sample},
                       {"branch", optional_branch(s.branch)},
                       {"duration", s.duration},
                       {"overload", s.overload},
                       {"weight", s.weight}});
    doc["top_scenarios"] = std::move(top);
    doc["positive_overload_branches"] = r.positive_overload_branches;

    const RiskCurves& c = r.curves;
    doc["curves"] = {{"bin_width", c.bin_width},  {"max_tau", c.max_tau},
                     {"branches", c.branches},    {"samples", c.samples},
                     {"mass", c.mass},            {"probability", c.probability},
                     {"mean_overload", c.mean_overload}};

    json iterations = json::array();
    for (const auto& it : r.ce.iterations)
        iterations.push_back(
            {{"iteration", it.iteration}, {"level", it.level}, {"elites", it.elites}, {"change", it.change}});
    doc["cross_entropy"] = {{"used", r.ce.used},
                            {"converged", r.ce.converged},
                            {"reached", r.ce.reached},
                            {"evaluations", r.ce.evaluations},
                            {"iterations", std::move(iterations)},
                            {"proposal", distribution_json(r.ce.proposal)}};
    return doc;
}

RiskReport report_from_json(const json& doc) {
    try {
        RiskReport r;
        r.schema_version = doc.at("schema_version").get<int>();
        if (r.schema_version > kReportSchemaVersion)
            throw ParseError("report schema version " + std::to_string(r.schema_version) + " is newer than " +
                             std::to_string(kReportSchemaVersion));
        const json& md = doc.at("metadata");
        r.seed = md.at("seed").get<std::uint64_t>();
        r.config_hash = md.at("config_hash").get<std::string>();
        r.model = md.at("model").get<std::string>();
        r.noise_scale = md.at("noise_scale").get<double>();
        r.horizon = md.at("horizon").get<double>();
        r.dt = md.at("dt").get<double>();
        r.rate = md.at("rate").get<double>();
        r.sampler = md.at("sampler").get<std::string>();
        r.backend = md.at("backend").get<std::string>();
        r.rule = exceedance_from_string(md.at("rule").get<std::string>());
        r.buses = md.at("buses").get<std::size_t>();
        r.branches = md.at("branches").get<std::size_t>();
        r.samples = md.at("samples").get<std::size_t>();
        r.evaluations = md.at("evaluations").get<std::size_t>();
        r.ess = md.at("ess").get<double>();
        r.degraded = md.at("degraded").get<bool>();
        r.warnings = md.at("warnings").get<std::vector<std::string>>();

        const json& p = doc.at("policy");
        r.policy.t_star = p.at("t_star").get<double>();
        r.policy.warning_lower = p.at("warning_lower").get<double>();
        r.policy.emergency_above = p.at("emergency_above").get<double>();
        r.monitored = doc.at("monitored").get<std::vector<std::size_t>>();
        r.transformer = doc.at("transformer").get<std::vector<bool>>();

        for (const auto& f : doc.at("failures"))
            r.failures.push_back({f.at("sample").get<std::size_t>(), f.at("reason").get<std::string>()});

        const json& rows = doc.at("joint");
        if (rows.size() != r.branches) throw ParseError("field 'joint': expected one row per branch");
        const std::size_t m = r.monitored.size();
        r.joint.reserve(r.branches * m);
        for (const auto& row : rows) {
            if (row.size() != m) throw ParseError("field 'joint': expected one column per monitored branch");
            for (const auto& v : row) r.joint.push_back(v.get<double>());
        }

        for (const auto& x : doc.at("marginal"))
            r.marginal.push_back({x.at("branch").get<std::size_t>(), x.at("probability").get<double>(),
                                  x.at("standard_error").get<double>(), x.at("mean_overload").get<double>(),
                                  risk_zone_from_string(x.at("zone").get<std::string>())});
        for (const auto& g : doc.at("global"))
            r.global.push_back({g.at("gamma").get<double>(), g.at("probability").get<double>(),
                                g.at("standard_error").get<double>(), g.at("ess").get<double>()});
        for (const auto& f : doc.at("faulted_ranking"))
            r.faulted_ranking.push_back({f.at("branch").get<std::size_t>(), f.at("probability").get<double>(),
                                         f.at("mean_overload").get<double>()});
        for (const auto& v : doc.at("vulnerability_ranking"))
            r.vulnerability_ranking.push_back({v.at("branch").get<std::size_t>(),
                                               v.at("recurrences").get<std::size_t>(),
                                               v.at("probability").get<double>(), v.at("transformer").get<bool>()});
        for (const auto& s : doc.at("top_scenarios")) {
            ScenarioRecord rec;
            rec.sample = s.at("sample").get<std::size_t>();
            if (!s.at("branch").is_null()) rec.branch = s.at("branch").get<std::size_t>();
            rec.duration = s.at("duration").get<double>();
            rec.overload = s.at("overload").get<double>();
            rec.weight = s.at("weight").get<double>();
            r.top_scenarios.push_back(rec);
        }
        r.positive_overload_branches = doc.at("positive_overload_branches").get<std::size_t>();

        const json& c = doc.at("curves");
        r.curves.bin_width = c.at("bin_width").get<double>();
        r.curves.max_tau = c.at("max_tau").get<double>();
        r.curves.branches = c.at("branches").get<std::vector<std::size_t>>();
        r.curves.samples = c.at("samples").get<std::vector<std::size_t>>();
        r.curves.mass = c.at("mass").get<std::vector<double>>();
        r.curves.probability = c.at("probability").get<std::vector<double>>();
        r.curves.mean_overload = c.at("mean_overload").get<std::vector<double>>();
        const std::size_t cells = r.curves.branches.size() * r.curves.samples.size();
        if (r.curves.probability.size() != cells || r.curves.mean_overload.size() != cells ||
            r.curves.mass.size() != r.curves.samples.size())
            throw ParseError("field 'curves': inconsistent dimensions");

        const json& ce = doc.at("cross_entropy");
        r.ce.used = ce.at("used").get<bool>();
        r.ce.converged = ce.at("converged").get<bool>();
        r.ce.reached = ce.at("reached").get<bool>();
        r.ce.evaluations = ce.at("evaluations").get<std::size_t>();
        for (const auto& it : ce.at("iterations"))
            r.ce.iterations.push_back({it.at("iteration").get<int>(), it.at("level").get<double>(),
                                       it.at("elites").get<std::size_t>(), it.at("change").get<double>()});
        r.ce.proposal = distribution_from(ce.at("proposal"));
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("report: ") + e.what());
    }
}

std::string emit_report_json(const RiskReport& report) { return report_to_json(report).dump(1) + "\n"; }

RiskReport parse_report_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("report: ") + e.what());
    }
    return report_from_json(doc);
}

RiskReport load_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open report '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_report_json(ss.str());
}

json curves_to_json(const RiskReport& r, std::size_t branch) {
    const RiskCurves& c = r.curves;
    std::size_t pos = c.branches.size();
    for (std::size_t e = 0; e < c.branches.size(); ++e)
        if (c.branches[e] == branch) pos = e;
    if (pos == c.branches.size()) throw ReferenceError("branch " + std::to_string(branch) + " is not monitored");
    const std::size_t bins = c.bins();
    std::vector<double> lower(bins), prob(bins), mean(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        lower[b] = static_cast<double>(b) * c.bin_width;
        prob[b] = c.probability[pos * bins + b];
        mean[b] = c.mean_overload[pos * bins + b];
    }
    const MarginalRisk* mr = pos < r.marginal.size() ? &r.marginal[pos] : nullptr;
    json doc = {{"schema_version", r.schema_version},
                {"branch", branch},
                {"bin_width", c.bin_width},
                {"tau_lower", lower},
                {"samples", c.samples},
                {"probability", prob},
                {"mean_overload", mean},
                {"bands", {{"warning_lower", r.policy.warning_lower}, {"emergency_above", r.policy.emergency_above}}},
                {"t_star", r.policy.t_star}};
    if (mr) {
        doc["marginal"] = {{"probability", mr->probability},
                           {"standard_error", mr->standard_error},
                           {"zone", std::string(to_string(mr->zone))}};
    }
    return doc;
}

CsvTables report_to_csv(const RiskReport& r) {
    CsvTables t;
    const std::size_t m = r.monitored.size();
    std::ostringstream mx;
    mx << "faulted,monitored,probability\n";
    for (std::size_t a = 0; a < r.branches; ++a)
        for (std::size_t e = 0; e < m; ++e) {
            const double q = r.joint[a * m + e];
            if (q != 0.0) mx << a << ',' << r.monitored[e] << ',' << csv_number(q) << '\n';
        }
    t.matrix = mx.str();

    std::ostringstream mg;
    mg << "branch,transformer,probability,standard_error,mean_overload,zone\n";
    for (std::size_t e = 0; e < r.marginal.size(); ++e) {
        const auto& x = r.marginal[e];
        mg << x.branch << ',' << (e < r.transformer.size() && r.transformer[e] ? 1 : 0) << ','
           << csv_number(x.probability) << ',' << csv_number(x.standard_error) << ',' << csv_number(x.mean_overload)
           << ',' << to_string(x.zone) << '\n';
    }
    t.marginal = mg.str();

    std::ostringstream fr;
    fr << "rank,branch,probability,mean_overload\n";
    for (std::size_t i = 0; i < r.faulted_ranking.size(); ++i) {
        const auto& f = r.faulted_ranking[i];
        fr << i + 1 << ',' << f.branch << ',' << csv_number(f.probability) << ',' << csv_number(f.mean_overload)
           << '\n';
    }
    t.faulted = fr.str();

    std::ostringstream vr;
    vr << "rank,branch,recurrences,probability,transformer\n";
    for (std::size_t i = 0; i < r.vulnerability_ranking.size(); ++i) {
        const auto& v = r.vulnerability_ranking[i];
        vr << i + 1 << ',' << v.branch << ',' << v.recurrences << ',' << csv_number(v.probability) << ','
           << (v.transformer ? 1 : 0) << '\n';
    }
    t.vulnerable = vr.str();
    return t;
}

void write_report_json(const RiskReport& report, const std::string& path, const std::optional<Timings>& timings) {
    json doc = report_to_json(report);
    if (timings)
        doc["metadata"]["timings"] = {{"cache_seconds", timings->cache_seconds},
                                      {"ce_seconds", timings->ce_seconds},
                                      {"sweep_seconds", timings->sweep_seconds},
                                      {"total_seconds", timings->total_seconds}};
    write_atomic(path, doc.dump(1) + "\n");
}

void write_report_csv(const RiskReport& report, const std::string& prefix) {
    const CsvTables t = report_to_csv(report);
    write_atomic(prefix + "_matrix.csv", t.matrix);
    write_atomic(prefix + "_marginal.csv", t.marginal);
    write_atomic(prefix + "_faulted.csv", t.faulted);
    write_atomic(prefix + "_vulnerable.csv", t.vulnerable);
}

}  // namespace dynscreen
