#include "dynscreen/grid.hpp"

#include "dynscreen/errors.hpp"

#include <numeric>
#include <queue>
#include <string>

namespace dynscreen {

std::string_view to_string(BusKind kind) noexcept {
    switch (kind) {
        case BusKind::generator: return "generator";
        case BusKind::condenser: return "condenser";
        case BusKind::load: break;
    }
    return "load";
}

BusKind bus_kind_from_string(std::string_view text) {
    if (text == "generator") return BusKind::generator;
    if (text == "condenser") return BusKind::condenser;
    if (text == "load") return BusKind::load;
    throw ParseError("unknown bus kind '" + std::string(text) + "'");
}

Grid::Grid(std::vector<Bus> buses, std::vector<Branch> branches,
           std::vector<std::size_t> monitored, int reference_bus)
    : buses_(std::move(buses)),
      branches_(std::move(branches)),
      monitored_(std::move(monitored)),
      reference_bus_(reference_bus) {
    if (buses_.empty()) throw TopologyError("grid has no buses");

    for (std::size_t i = 0; i < buses_.size(); ++i) {
        const Bus& bus = buses_[i];
        if (!index_.emplace(bus.id, i).second)
            throw ContractError("duplicate bus id " + std::to_string(bus.id));
        if (!(bus.inertia > 0.0))
            throw ContractError("bus " + std::to_string(bus.id) + ": inertia must be positive");
        if (!(bus.damping > 0.0))
            throw ContractError("bus " + std::to_string(bus.id) + ": damping must be positive");
    }

    endpoints_.reserve(branches_.size());
    for (std::size_t k = 0; k < branches_.size(); ++k) {
        const Branch& br = branches_[k];
        auto f = index_.find(br.from);
        auto t = index_.find(br.to);
        if (f == index_.end() || t == index_.end())
            throw ReferenceError("branch " + std::to_string(k) + " references unknown bus " +
                                 std::to_string(f == index_.end() ? br.from : br.to));
        if (br.from == br.to)
            throw ContractError("branch " + std::to_string(k) + " is a self loop");
        if (!(br.susceptance > 0.0))
            throw ContractError("branch " + std::to_string(k) + ": susceptance must be positive");
        if (!(br.thermal_limit > 0.0))
            throw ContractError("branch " + std::to_string(k) + ": thermal limit must be positive");
        endpoints_.emplace_back(f->second, t->second);
    }

    auto ref = index_.find(reference_bus_);
    if (ref == index_.end())
        throw ReferenceError("reference bus " + std::to_string(reference_bus_) + " does not exist");
    reference_index_ = ref->second;

    for (std::size_t m : monitored_) {
        if (m >= branches_.size())
            throw ReferenceError("monitored branch " + std::to_string(m) + " does not exist");
    }

    // Connectivity by BFS over branches.
    std::vector<std::vector<std::size_t>> adjacency(buses_.size());
    for (auto [a, b] : endpoints_) {
        adjacency[a].push_back(b);
        adjacency[b].push_back(a);
    }
    std::vector<char> seen(buses_.size(), 0);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = 1;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        std::size_t u = frontier.front();
        frontier.pop();
        for (std::size_t v : adjacency[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++reached;
                frontier.push(v);
            }
        }
    }
    if (reached != buses_.size())
        throw TopologyError("grid is not connected: " + std::to_string(buses_.size() - reached) +
                            " of " + std::to_string(buses_.size()) + " buses are islanded");
}

std::size_t Grid::index_of(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw ReferenceError("unknown bus id " + std::to_string(id));
    return it->second;
}

Vector Grid::injections() const {
    Vector p(buses_.size());
    for (std::size_t i = 0; i < buses_.size(); ++i) p[i] = buses_[i].injection;
    return p;
}

Vector Grid::inertias() const {
    Vector m(buses_.size());
    for (std::size_t i = 0; i < buses_.size(); ++i) m[i] = buses_[i].inertia;
    return m;
}

Vector Grid::dampings() const {
    Vector d(buses_.size());
    for (std::size_t i = 0; i < buses_.size(); ++i) d[i] = buses_[i].damping;
    return d;
}

Grid Grid::with_monitored(std::vector<std::size_t> monitored) const {
    return Grid(buses_, branches_, std::move(monitored), reference_bus_);
}

Grid Grid::with_limits(std::span<const double> limits) const {
    if (limits.size() != branches_.size())
        throw ContractError("limit vector size does not match branch count");
    auto branches = branches_;
    for (std::size_t k = 0; k < branches.size(); ++k) branches[k].thermal_limit = limits[k];
    return Grid(buses_, std::move(branches), monitored_, reference_bus_);
}

std::vector<std::size_t> all_branches(std::size_t branch_count) {
    std::vector<std::size_t> out(branch_count);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
}

}  // namespace dynscreen
