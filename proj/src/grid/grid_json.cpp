#include "dynscreen/case_io.hpp"
#include "dynscreen/errors.hpp"

#include <set>

namespace dynscreen {
namespace {

using nlohmann::json;

const json& field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object()) throw ParseError(where + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(where + "." + key + ": missing field");
    return *it;
}

double number(const json& obj, const char* key, const std::string& where) {
    const json& v = field(obj, key, where);
    if (!v.is_number()) throw ParseError(where + "." + key + ": expected a number");
    return v.get<double>();
}

int integer(const json& obj, const char* key, const std::string& where) {
    const json& v = field(obj, key, where);
    if (!v.is_number_integer()) throw ParseError(where + "." + key + ": expected an integer");
    return v.get<int>();
}

}  // namespace

Grid grid_from_json(const json& doc) {
    if (!doc.is_object()) throw ParseError("grid document must be a JSON object");
    const int version = integer(doc, "format_version", "grid");
    if (version != kGridFormatVersion)
        throw ParseError("grid.format_version: unsupported version " + std::to_string(version));

    const json& jbuses = field(doc, "buses", "grid");
    if (!jbuses.is_array()) throw ParseError("grid.buses: expected an array");
    std::vector<Bus> buses;
    std::set<int> ids;
    for (std::size_t i = 0; i < jbuses.size(); ++i) {
        const std::string where = "buses[" + std::to_string(i) + "]";
        const json& jb = jbuses[i];
        Bus bus;
        bus.id = integer(jb, "id", where);
        if (!ids.insert(bus.id).second)
            throw ParseError(where + ".id: duplicate bus id " + std::to_string(bus.id));
        bus.inertia = number(jb, "m", where);
        bus.damping = number(jb, "d", where);
        bus.injection = number(jb, "p", where);
        const json& kind = field(jb, "kind", where);
        if (!kind.is_string()) throw ParseError(where + ".kind: expected a string");
        try {
            bus.kind = bus_kind_from_string(kind.get<std::string>());
        } catch (const ParseError& e) {
            throw ParseError(where + ".kind: " + e.what());
        }
        if (!(bus.inertia > 0.0)) throw ParseError(where + ".m: must be positive");
        if (!(bus.damping > 0.0)) throw ParseError(where + ".d: must be positive");
        buses.push_back(bus);
    }

    const json& jbranches = field(doc, "branches", "grid");
    if (!jbranches.is_array()) throw ParseError("grid.branches: expected an array");
    std::vector<Branch> branches;
    for (std::size_t k = 0; k < jbranches.size(); ++k) {
        const std::string where = "branches[" + std::to_string(k) + "]";
        const json& jb = jbranches[k];
        Branch br;
        br.from = integer(jb, "from", where);
        br.to = integer(jb, "to", where);
        br.susceptance = number(jb, "beta", where);
        br.thermal_limit = number(jb, "limit", where);
        const json& tr = field(jb, "transformer", where);
        if (!tr.is_boolean()) throw ParseError(where + ".transformer: expected a boolean");
        br.is_transformer = tr.get<bool>();
        if (!(br.susceptance > 0.0)) throw ParseError(where + ".beta: must be positive");
        if (!(br.thermal_limit > 0.0)) throw ParseError(where + ".limit: must be positive");
        if (br.from == br.to) throw ParseError(where + ": from and to must differ");
        if (!ids.contains(br.from)) throw ReferenceError(where + ".from: unknown bus " + std::to_string(br.from));
        if (!ids.contains(br.to)) throw ReferenceError(where + ".to: unknown bus " + std::to_string(br.to));
        branches.push_back(br);
    }

    std::vector<std::size_t> monitored;
    if (auto it = doc.find("monitored"); it != doc.end()) {
        if (!it->is_array()) throw ParseError("grid.monitored: expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const json& m = (*it)[i];
            if (!m.is_number_unsigned() || m.get<std::size_t>() >= branches.size())
                throw ParseError("monitored[" + std::to_string(i) + "]: not a branch index");
            monitored.push_back(m.get<std::size_t>());
        }
    } else {
        monitored = all_branches(branches.size());
    }

    const int reference = integer(doc, "reference", "grid");
    if (!ids.contains(reference))
        throw ParseError("grid.reference: unknown bus " + std::to_string(reference));
    return Grid(std::move(buses), std::move(branches), std::move(monitored), reference);
}

Grid parse_grid_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("grid JSON: ") + e.what());
    }
    return grid_from_json(doc);
}

json grid_to_json(const Grid& grid) {
    json doc;
    doc["format_version"] = kGridFormatVersion;
    json buses = json::array();
    for (const Bus& b : grid.buses()) {
        buses.push_back({{"id", b.id},
                         {"m", b.inertia},
                         {"d", b.damping},
                         {"p", b.injection},
                         {"kind", std::string(to_string(b.kind))}});
    }
    json branches = json::array();
    for (const Branch& br : grid.branches()) {
        branches.push_back({{"from", br.from},
                            {"to", br.to},
                            {"beta", br.susceptance},
                            {"limit", br.thermal_limit},
                            {"transformer", br.is_transformer}});
    }
    doc["buses"] = std::move(buses);
    doc["branches"] = std::move(branches);
    doc["monitored"] = grid.monitored();
    doc["reference"] = grid.reference_bus();
    return doc;
}

std::string emit_grid_json(const Grid& grid) { return grid_to_json(grid).dump(2); }

}  // namespace dynscreen
