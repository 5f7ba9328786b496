#include <set>

#include <fmt/format.h>

#include "ttiga/driver.hpp"

namespace ttiga {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) {
        throw ConfigError(fmt::format("{} must be a JSON object", where));
    }
    for (const auto& [k, v] : j.items()) {
        if (!allowed.contains(k)) {
            throw ConfigError(fmt::format("unknown key '{}' in {}", k, where));
        }
    }
}

double get_number(const json& j, const std::string& key) {
    const auto& v = j.at(key);
    if (!v.is_number()) {
        throw ConfigError(fmt::format("'{}' must be a number", key));
    }
    return v.get<double>();
}

int get_int(const json& j, const std::string& key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) {
        throw ConfigError(fmt::format("'{}' must be an integer", key));
    }
    return v.get<int>();
}

std::string get_string(const json& j, const std::string& key) {
    const auto& v = j.at(key);
    if (!v.is_string()) {
        throw ConfigError(fmt::format("'{}' must be a string", key));
    }
    return v.get<std::string>();
}

std::array<int, 3> get_triple(const json& j, const std::string& key) {
    const auto& v = j.at(key);
    if (v.is_number_integer()) {
        const int x = v.get<int>();
        return {x, x, x};
    }
    if (v.is_array() && v.size() == 3 && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_integer(); })) {
        return {v[0].get<int>(), v[1].get<int>(), v[2].get<int>()};
    }
    throw ConfigError(fmt::format("'{}' must be an integer or an array of three integers", key));
}

std::map<std::string, double> get_number_map(const json& j, const std::string& key) {
    const auto& v = j.at(key);
    if (!v.is_object()) {
        throw ConfigError(fmt::format("'{}' must be an object of numbers", key));
    }
    std::map<std::string, double> out;
    for (const auto& [k, e] : v.items()) {
        if (!e.is_number()) {
            throw ConfigError(fmt::format("'{}.{}' must be a number", key, k));
        }
        out[k] = e.get<double>();
    }
    return out;
}

std::uint64_t get_seed(const json& j, const std::string& key) {
    const auto& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw ConfigError(fmt::format("'{}' must be a non-negative integer", key));
    }
    return v.get<std::uint64_t>();
}

} // namespace

std::string default_run_name(const SolveConfig& c) {
    const auto t = [](const std::array<int, 3>& a) {
        return a[0] == a[1] && a[1] == a[2] ? std::to_string(a[0]) : fmt::format("{}x{}x{}", a[0], a[1], a[2]);
    };
    return fmt::format("{}_p{}_e{}", to_string(c.geometry), t(c.degree), t(c.elements));
}

SolveConfig config_from_json(const json& j) {
    check_keys(j,
               {"name", "geometry", "geometry_params", "degree", "elements", "eps_cross", "eps_solve", "eps_round",
                "rank_cap", "source", "analytic", "analytic_params", "boundary", "seed", "reference", "amen"},
               "run config");
    SolveConfig c;
    if (!j.contains("geometry")) {
        throw ConfigError("run config needs 'geometry'");
    }
    try {
        c.geometry = parse_geometry_kind(get_string(j, "geometry"));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (j.contains("geometry_params")) c.geometry_params = get_number_map(j, "geometry_params");
    if (j.contains("degree")) c.degree = get_triple(j, "degree");
    if (j.contains("elements")) c.elements = get_triple(j, "elements");
    c.name = j.contains("name") ? get_string(j, "name") : default_run_name(c);
    if (j.contains("eps_cross")) c.eps_cross = get_number(j, "eps_cross");
    if (j.contains("eps_solve")) c.eps_solve = get_number(j, "eps_solve");
    if (j.contains("eps_round")) c.eps_round = get_number(j, "eps_round");
    if (j.contains("rank_cap")) c.rank_cap = get_int(j, "rank_cap");
    if (j.contains("source")) c.source = get_string(j, "source");
    if (j.contains("analytic")) {
        if (!j.at("analytic").is_null()) c.analytic = get_string(j, "analytic");
    }
    if (j.contains("analytic_params")) c.analytic_params = get_number_map(j, "analytic_params");
    if (j.contains("seed")) c.seed = get_seed(j, "seed");
    if (j.contains("reference")) {
        if (!j.at("reference").is_boolean()) throw ConfigError("'reference' must be a boolean");
        c.reference = j.at("reference").get<bool>();
    }
    if (j.contains("amen")) {
        const auto& a = j.at("amen");
        check_keys(a, {"max_sweeps", "enrichment_rank", "local_direct_max", "max_rank"}, "amen");
        if (a.contains("max_sweeps")) c.amen_max_sweeps = get_int(a, "max_sweeps");
        if (a.contains("enrichment_rank")) c.amen_enrichment_rank = get_int(a, "enrichment_rank");
        if (a.contains("local_direct_max")) c.amen_local_direct_max = get_int(a, "local_direct_max");
        if (a.contains("max_rank")) c.amen_max_rank = get_int(a, "max_rank");
    }
    if (j.contains("boundary")) {
        const auto& b = j.at("boundary");
        check_keys(b, {"xi1_min", "xi1_max", "xi2_min", "xi2_max", "xi3_min", "xi3_max"}, "boundary");
        std::array<FaceSetting, 6> faces{};
        for (const auto& [k, v] : b.items()) {
            auto& f = faces[static_cast<std::size_t>(parse_face(k))];
            if (v.is_number()) {
                f.dirichlet = true;
                f.value = v.get<double>();
            } else if (v == "analytic") {
                f.dirichlet = true;
                f.analytic = true;
            } else if (v != "natural") {
                throw ConfigError(fmt::format("boundary.{} must be a number, \"analytic\" or \"natural\"", k));
            }
        }
        c.boundary = faces;
    }
    // name checks happen here so that a bad file fails before any solve starts
    make_source(c.source);
    if (c.analytic) make_analytic(*c.analytic, c.geometry_params, c.analytic_params);
    c.validate();
    return c;
}

json config_to_json(const SolveConfig& c) {
    json j = {{"name", c.name},
              {"geometry", to_string(c.geometry)},
              {"geometry_params", c.geometry_params},
              {"degree", c.degree},
              {"elements", c.elements},
              {"eps_cross", c.eps_cross},
              {"eps_solve", c.eps_solve},
              {"eps_round", c.eps_round},
              {"rank_cap", c.rank_cap},
              {"source", c.source},
              {"analytic", c.analytic ? json(*c.analytic) : json(nullptr)},
              {"analytic_params", c.analytic_params},
              {"seed", c.seed},
              {"reference", c.reference},
              {"amen",
               {{"max_sweeps", c.amen_max_sweeps},
                {"enrichment_rank", c.amen_enrichment_rank},
                {"local_direct_max", c.amen_local_direct_max},
                {"max_rank", c.amen_max_rank}}}};
    if (c.boundary) {
        json b = json::object();
        for (std::size_t f = 0; f < 6; ++f) {
            const auto& s = (*c.boundary)[f];
            b[to_string(static_cast<Face>(f))] = !s.dirichlet ? json("natural") : s.analytic ? json("analytic") : json(s.value);
        }
        j["boundary"] = b;
    }
    return j;
}

ExperimentFile experiment_from_json(const json& j) {
    ExperimentFile e;
    if (j.is_object() && j.contains("geometry")) {
        e.runs.push_back(config_from_json(j));
        return e;
    }
    check_keys(j, {"name", "runs", "out", "seed", "crossover"}, "experiment file");
    if (j.contains("name")) e.name = get_string(j, "name");
    if (j.contains("out")) e.out = get_string(j, "out");
    if (j.contains("seed")) e.seed = get_seed(j, "seed");
    if (j.contains("runs")) {
        if (!j.at("runs").is_array()) throw ConfigError("'runs' must be an array");
        for (const auto& r : j.at("runs")) e.runs.push_back(config_from_json(r));
    }
    if (j.contains("crossover")) {
        const auto& c = j.at("crossover");
        check_keys(c, {"base", "elements"}, "crossover");
        if (!c.contains("base") || !c.contains("elements")) throw ConfigError("crossover needs 'base' and 'elements'");
        e.crossover_base = config_from_json(c.at("base"));
        if (!c.at("elements").is_array()) throw ConfigError("crossover.elements must be an array");
        for (const auto& v : c.at("elements")) {
            if (!v.is_number_integer() || v.get<int>() < 1) throw ConfigError("crossover.elements must hold positive integers");
            e.crossover_elements.push_back(v.get<int>());
        }
    }
    if (e.runs.empty() && !e.crossover_base) {
        throw ConfigError("experiment file has no runs");
    }
    if (e.seed) {
        for (auto& r : e.runs) r.seed = *e.seed;
        if (e.crossover_base) e.crossover_base->seed = *e.seed;
    }
    return e;
}

} // namespace ttiga
