#include "dynscreen/case_io.hpp"
#include "dynscreen/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace dynscreen {
namespace {

struct Row {
    std::size_t line = 0;
    std::vector<double> values;
};

struct Section {
    std::size_t line = 0;
    std::vector<Row> rows;
};

struct CaseTables {
    std::optional<double> base_mva;
    std::map<std::string, Section, std::less<>> sections;
};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_number(std::string_view token, std::size_t line, std::string_view section) {
    double value = 0.0;
    if (token == "Inf" || token == "inf") return HUGE_VAL;
    if (token == "-Inf" || token == "-inf") return -HUGE_VAL;
    const char* begin = token.data();
    if (!token.empty() && token.front() == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size())
        throw ParseError("invalid number '" + std::string(token) + "' in section '" +
                             std::string(section) + "'",
                         line);
    return value;
}

CaseTables tokenize(std::string_view text) {
    CaseTables tables;
    std::string open_name;
    Section* open = nullptr;
    Row row;

    auto flush_row = [&] {
        if (!row.values.empty()) open->rows.push_back(std::move(row));
        row = Row{};
    };

    // Consumes matrix body text; returns true once the closing bracket is seen.
    auto consume = [&](std::string_view body, std::size_t line) {
        std::size_t pos = 0;
        while (pos < body.size()) {
            const char c = body[pos];
            if (c == ' ' || c == '\t' || c == '\r' || c == ',') {
                ++pos;
            } else if (c == ';') {
                flush_row();
                ++pos;
            } else if (c == ']') {
                flush_row();
                return true;
            } else {
                std::size_t end = pos;
                while (end < body.size() && std::string_view(" \t\r,;]").find(body[end]) ==
                                                std::string_view::npos)
                    ++end;
                if (row.values.empty()) row.line = line;
                row.values.push_back(parse_number(body.substr(pos, end - pos), line, open_name));
                pos = end;
            }
        }
        return false;
    };

    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        ++line_no;
        start = end + 1;

        if (auto pct = line.find('%'); pct != std::string_view::npos) line = line.substr(0, pct);
        line = trim(line);
        if (line.empty()) {
            if (open) flush_row();
            if (end == text.size()) break;
            continue;
        }

        if (open) {
            if (consume(line, line_no)) {
                open = nullptr;
            } else {
                flush_row();  // newline terminates a row
            }
            continue;
        }

        const auto eq = line.find('=');
        const auto dot = line.find('.');
        if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) continue;
        std::string name(trim(line.substr(dot + 1, eq - dot - 1)));
        std::string_view rhs = trim(line.substr(eq + 1));
        if (!rhs.empty() && rhs.front() == '[') {
            auto [it, inserted] = tables.sections.try_emplace(name);
            if (!inserted) throw ParseError("duplicate section '" + name + "'", line_no);
            it->second.line = line_no;
            open = &it->second;
            open_name = name;
            if (consume(rhs.substr(1), line_no)) {
                open = nullptr;
            } else {
                flush_row();
            }
        } else if (name == "baseMVA") {
            if (!rhs.empty() && rhs.back() == ';') rhs.remove_suffix(1);
            tables.base_mva = parse_number(trim(rhs), line_no, "baseMVA");
        }
        if (end == text.size()) break;
    }
    if (open)
        throw ParseError("section '" + open_name + "' is not terminated by ']'",
                         tables.sections.at(open_name).line);
    return tables;
}

const Section& require(const CaseTables& tables, std::string_view name, std::size_t min_columns) {
    auto it = tables.sections.find(name);
    if (it == tables.sections.end())
        throw ParseError("missing section '" + std::string(name) + "'");
    for (const Row& r : it->second.rows) {
        if (r.values.size() < min_columns)
            throw ParseError("section '" + std::string(name) + "' row has " +
                                 std::to_string(r.values.size()) + " columns, expected at least " +
                                 std::to_string(min_columns),
                             r.line);
    }
    return it->second;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int as_int(double v, std::size_t line) {
    if (v != std::floor(v)) throw ParseError("expected an integer bus number", line);
    return static_cast<int>(v);
}

}  // namespace

Grid parse_matpower_case(std::string_view text, const CaseOptions& options) {
    const CaseTables tables = tokenize(text);
    const double base = tables.base_mva.value_or(100.0);
    if (!(base > 0.0)) throw ParseError("baseMVA must be positive");

    const Section& bus_rows = require(tables, "bus", 3);
    const Section& gen_rows = require(tables, "gen", 9);
    const Section& branch_rows = require(tables, "branch", 11);
    if (bus_rows.rows.empty()) throw ParseError("bus section is empty", bus_rows.line);

    std::vector<Bus> buses;
    std::map<int, std::size_t> index;
    std::optional<int> slack;
    for (const Row& r : bus_rows.rows) {
        const int id = as_int(r.values[0], r.line);
        if (!index.emplace(id, buses.size()).second)
            throw ParseError("duplicate bus number " + std::to_string(id), r.line);
        Bus bus;
        bus.id = id;
        bus.injection = -r.values[2] / base;
        buses.push_back(bus);
        if (r.values[1] == 3.0 && !slack) slack = id;
    }

    std::vector<double> rating(buses.size(), 0.0);
    std::vector<double> generation(buses.size(), 0.0);
    std::vector<char> has_unit(buses.size(), 0);
    for (const Row& r : gen_rows.rows) {
        const int id = as_int(r.values[0], r.line);
        auto it = index.find(id);
        if (it == index.end())
            throw ReferenceError("line " + std::to_string(r.line) +
                                 ": generator references unknown bus " + std::to_string(id));
        if (r.values[7] <= 0.0) continue;  // out of service
        const std::size_t i = it->second;
        const double pg = r.values[1] / base;
        has_unit[i] = 1;
        generation[i] += pg;
        buses[i].injection += pg;
        rating[i] += std::max(r.values[8] / base, pg);
    }

    std::vector<double> gen_m;
    std::vector<double> gen_d;
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (has_unit[i] && generation[i] > 0.0) {
            buses[i].kind = BusKind::generator;
            buses[i].inertia = options.generator_inertia_per_rating * rating[i];
            buses[i].damping = options.generator_damping_per_rating * rating[i];
            gen_m.push_back(buses[i].inertia);
            gen_d.push_back(buses[i].damping);
        } else {
            buses[i].kind = has_unit[i] ? BusKind::condenser : BusKind::load;
        }
    }
    if (gen_m.empty()) throw ParseError("case has no in-service generator with positive output");
    const double load_m = options.load_inertia_factor * median(gen_m);
    const double load_d = options.load_damping_factor * median(gen_d);
    for (Bus& bus : buses) {
        if (bus.kind != BusKind::generator) {
            bus.inertia = load_m;
            bus.damping = load_d;
        }
    }

    double mean = 0.0;
    for (const Bus& bus : buses) mean += bus.injection;
    mean /= static_cast<double>(buses.size());
    for (Bus& bus : buses) bus.injection -= mean;

    std::vector<Branch> branches;
    std::vector<double> case_rating;
    for (const Row& r : branch_rows.rows) {
        if (r.values[10] <= 0.0) continue;
        const int from = as_int(r.values[0], r.line);
        const int to = as_int(r.values[1], r.line);
        if (!index.contains(from) || !index.contains(to))
            throw ReferenceError("line " + std::to_string(r.line) + ": branch references unknown bus " +
                                 std::to_string(index.contains(from) ? to : from));
        const double x = r.values[3];
        if (!(x > 0.0)) throw ParseError("branch reactance must be positive", r.line);
        if (from == to) throw ParseError("branch connects a bus to itself", r.line);
        Branch br;
        br.from = from;
        br.to = to;
        br.susceptance = 1.0 / x;
        br.is_transformer = r.values[8] != 0.0;
        br.thermal_limit = 1.0;  // placeholder until the equilibrium is known
        branches.push_back(br);
        case_rating.push_back(r.values[5]);
    }
    if (branches.empty() && buses.size() > 1)
        throw TopologyError("case has no in-service branches");

    const int reference = slack.value_or(buses.front().id);
    auto monitored = options.monitored.value_or(all_branches(branches.size()));
    Grid provisional(buses, branches, monitored, reference);

    const Vector theta = equilibrium_angles(provisional);
    const Vector flows = branch_flows(provisional, theta);
    std::vector<double> limits(branches.size());
    for (std::size_t k = 0; k < branches.size(); ++k) {
        const double r = case_rating[k];
        if (r > 0.0 && r < options.unrated_sentinel_mva) {
            limits[k] = r / base;
        } else {
            limits[k] = std::max(options.limit_margin * std::abs(flows[static_cast<Eigen::Index>(k)]),
                                 options.min_limit);
        }
    }
    return provisional.with_limits(limits);
}

Grid load_matpower_case(const std::string& path, const CaseOptions& options) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open case file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_matpower_case(buffer.str(), options);
}

Grid load_grid(const std::string& path, const CaseOptions& options) {
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open grid file '" + path + "'");
        std::stringstream buffer;
        buffer << in.rdbuf();
        Grid grid = parse_grid_json(buffer.str());
        if (options.monitored) return grid.with_monitored(*options.monitored);
        return grid;
    }
    return load_matpower_case(path, options);
}

}  // namespace dynscreen
