#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "stratalloc/allocation.hpp"
#include "stratalloc/annealer.hpp"
#include "stratalloc/common.hpp"
#include "stratalloc/csv.hpp"
#include "stratalloc/frame.hpp"
#include "stratalloc/tuner.hpp"

namespace stratalloc::io {

using nlohmann::json;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// Filesystem-safe version of a domain label.
inline std::string slug(const std::string& label) {
    std::string out;
    for (char c : label) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    }
    return out.empty() ? "_" : out;
}

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw InputError(path + ": " + e.what());
    }
    return j;
}

inline void save_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path);
    out << j.dump(2) << "\n";
}

// ---- frame configuration -------------------------------------------------

struct FrameConfig {
    std::string csv_path;  // may be empty; the CLI can override
    FrameSchema schema;
};

inline FrameConfig read_frame_config(const std::string& path) {
    const json j = load_json(path);
    FrameConfig config;
    try {
        if (j.contains("csv")) config.csv_path = j.at("csv").get<std::string>();
        config.schema.domain_column = j.at("domain_column").get<std::string>();
        config.schema.target_columns = j.at("target_columns").get<std::vector<std::string>>();
        for (const auto& aux : j.at("aux_columns")) {
            AuxColumn col;
            if (aux.is_string()) {
                col.name = aux.get<std::string>();
            } else {
                col.name = aux.at("name").get<std::string>();
                if (aux.contains("bins")) col.bins = aux.at("bins").get<int>();
            }
            config.schema.aux_columns.push_back(std::move(col));
        }
        const auto& eps = j.at("epsilon");
        if (eps.is_number()) {
            config.schema.epsilon.assign(config.schema.target_columns.size(), eps.get<double>());
        } else {
            config.schema.epsilon = eps.get<std::vector<double>>();
        }
        if (j.contains("variance")) {
            const auto v = j.at("variance").get<std::string>();
            if (v == "sample") config.schema.sample_variance = true;
            else if (v != "population") throw InputError(path + ": variance must be 'population' or 'sample'");
        }
    } catch (const json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
    config.schema.validate();
    return config;
}

// ---- per-domain atomic strata --------------------------------------------

inline json domain_to_json(const DomainProblem& p) {
    json atoms = json::array();
    for (const auto& a : p.atoms) {
        atoms.push_back({{"key", a.key}, {"count", a.count}, {"sums", a.sums}, {"sumsq", a.sumsq}});
    }
    return json{{"domain", p.domain},
                {"target_names", p.target_names},
                {"aux_names", p.aux_names},
                {"epsilon", p.epsilon},
                {"totals", p.totals},
                {"sample_variance", p.sample_variance},
                {"atomic_strata", std::move(atoms)}};
}

inline DomainProblem domain_from_json(const json& j, const std::string& origin) {
    DomainProblem p;
    try {
        p.domain = j.at("domain").get<std::string>();
        p.target_names = j.at("target_names").get<std::vector<std::string>>();
        if (j.contains("aux_names")) p.aux_names = j.at("aux_names").get<std::vector<std::string>>();
        p.epsilon = j.at("epsilon").get<std::vector<double>>();
        p.totals = j.at("totals").get<std::vector<double>>();
        if (j.contains("sample_variance")) p.sample_variance = j.at("sample_variance").get<bool>();
        for (const auto& aj : j.at("atomic_strata")) {
            AtomicStratum a;
            a.key = aj.at("key").get<std::vector<std::string>>();
            a.domain = p.domain;
            a.count = aj.at("count").get<std::int64_t>();
            a.sums = aj.at("sums").get<std::vector<double>>();
            a.sumsq = aj.at("sumsq").get<std::vector<double>>();
            p.atoms.push_back(std::move(a));
        }
    } catch (const json::exception& e) {
        throw InputError(origin + ": " + e.what());
    }
    p.validate();
    return p;
}

inline std::string write_domain_strata(const std::string& dir, const DomainProblem& p) {
    const std::string path = (std::filesystem::path(dir) / ("strata_" + slug(p.domain) + ".json")).string();
    save_json(path, domain_to_json(p));
    return path;
}

// Loads every strata_*.json under dir, sorted by domain label.
inline std::vector<DomainProblem> read_strata_dir(const std::string& dir) {
    std::vector<std::string> files;
    if (!std::filesystem::is_directory(dir)) throw InputError("not a directory: " + dir);
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("strata_", 0) == 0 && entry.path().extension() == ".json") {
            files.push_back(entry.path().string());
        }
    }
    if (files.empty()) throw InputError("no strata_*.json files in " + dir);
    std::vector<DomainProblem> problems;
    problems.reserve(files.size());
    for (const auto& f : files) problems.push_back(domain_from_json(load_json(f), f));
    std::sort(problems.begin(), problems.end(),
              [](const DomainProblem& a, const DomainProblem& b) { return a.domain < b.domain; });
    return problems;
}

// ---- partitions ------------------------------------------------------------

inline std::string join_key(const std::vector<std::string>& key) {
    std::string out;
    for (std::size_t i = 0; i < key.size(); ++i) {
        if (i > 0) out.push_back('|');
        out += key[i];
    }
    return out;
}

// Partition CSV: domain, atomic_stratum_key, stratum_label. Keys are the aux
// labels joined with '|'.
inline void write_partition(const std::string& path,
                            const std::vector<std::pair<const DomainProblem*, const std::vector<int>*>>& entries) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path);
    out << "domain,atomic_stratum_key,stratum_label\n";
    for (const auto& [problem, labels] : entries) {
        for (std::size_t i = 0; i < problem->atoms.size(); ++i) {
            out << csv::escape(problem->domain) << ',' << csv::escape(join_key(problem->atoms[i].key)) << ','
                << (*labels)[i] << '\n';
        }
    }
}

// Returns labels per domain, aligned with each problem's atom order.
inline std::map<std::string, std::vector<int>> read_partition(const std::string& path,
                                                              const std::vector<DomainProblem>& problems) {
    const csv::Table table = csv::read_file(path);
    const int dcol = table.column("domain");
    const int kcol = table.column("atomic_stratum_key");
    const int lcol = table.column("stratum_label");
    if (dcol < 0 || kcol < 0 || lcol < 0) {
        throw InputError(path + ": expected columns domain, atomic_stratum_key, stratum_label");
    }
    std::map<std::string, std::map<std::string, int>> by_domain;
    for (const auto& row : table.rows) {
        try {
            by_domain[row[dcol]][row[kcol]] = std::stoi(row[lcol]);
        } catch (const std::exception&) {
            throw InputError(path + ": bad stratum label '" + row[lcol] + "'");
        }
    }
    std::map<std::string, std::vector<int>> out;
    for (const auto& p : problems) {
        const auto it = by_domain.find(p.domain);
        if (it == by_domain.end()) throw InputError(path + ": no rows for domain '" + p.domain + "'");
        std::vector<int> labels;
        labels.reserve(p.atoms.size());
        for (const auto& a : p.atoms) {
            const auto kit = it->second.find(join_key(a.key));
            if (kit == it->second.end()) {
                throw InputError(path + ": domain '" + p.domain + "' missing atomic stratum '" + join_key(a.key) + "'");
            }
            labels.push_back(kit->second);
        }
        check_labels(labels, p.atoms.size());
        out[p.domain] = std::move(labels);
    }
    return out;
}

// ---- allocations -----------------------------------------------------------

inline json allocation_to_json(const DomainProblem& problem, const Evaluation& ev) {
    const std::vector<double> cv = achieved_cv(ev.allocation, ev.summaries, problem.totals);
    json strata = json::array();
    for (std::size_t h = 0; h < ev.summaries.size(); ++h) {
        strata.push_back({{"label", h + 1},
                          {"population", ev.summaries[h].population},
                          {"atomic_strata", ev.summaries[h].members.size()},
                          {"n", ev.allocation.stratum_n[h]}});
    }
    return json{{"domain", problem.domain}, {"cost", ev.cost},
                {"total_n", ev.allocation.total}, {"alphas", ev.allocation.alphas},
                {"cv_achieved", cv},            {"cv_limit", problem.epsilon},
                {"converged", ev.allocation.converged}, {"iterations", ev.allocation.iterations},
                {"strata", std::move(strata)}};
}

// ---- annealing traces --------------------------------------------------------

inline void write_trace(const std::string& path, const AnnealTrace& trace) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path);
    out << "sequence,temperature,best_cost,accepted_improving,accepted_metropolis,rejected\n";
    for (const auto& s : trace.sequences) {
        out << s.sequence << ',' << format_double(s.temperature) << ',' << format_double(s.best_cost) << ','
            << s.accepted_improving << ',' << s.accepted_metropolis << ',' << s.rejected << '\n';
    }
}

// ---- SA configuration --------------------------------------------------------

inline SaConfig read_sa_config(const std::string& path) {
    const json j = load_json(path);
    SaConfig config;
    try {
        if (j.contains("maxit")) config.maxit = j.at("maxit").get<int>();
        if (j.contains("J")) config.sequence_length = j.at("J").get<int>();
        if (j.contains("t_max")) config.t_max = j.at("t_max").get<double>();
        if (j.contains("t_min")) config.t_min = j.at("t_min").get<double>();
        if (j.contains("dc")) config.decrement = j.at("dc").get<double>();
        if (j.contains("l_max_pct")) config.l_max_pct = j.at("l_max_pct").get<double>();
        if (j.contains("p_new")) config.p_new = j.at("p_new").get<double>();
    } catch (const json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
    config.validate();
    return config;
}

inline json sa_config_to_json(const SaConfig& config) {
    return json{{"maxit", config.maxit},   {"J", config.sequence_length}, {"t_max", config.t_max},
                {"t_min", config.t_min},   {"dc", config.decrement},      {"l_max_pct", config.l_max_pct},
                {"p_new", config.p_new}};
}

// ---- tuner ranges ----------------------------------------------------------

struct TuneSpec {
    std::vector<ParamRange> ranges;
    TuneBudget budget;
};

inline TuneSpec read_tune_spec(const std::string& path) {
    const json j = load_json(path);
    TuneSpec spec;
    try {
        if (j.contains("budget")) {
            spec.budget.n_initial = j.at("budget").value("initial", 10);
            spec.budget.n_iterations = j.at("budget").value("iterations", 10);
        }
        for (const auto& rj : j.at("ranges")) {
            ParamRange r;
            r.name = rj.at("name").get<std::string>();
            const auto type = rj.value("type", std::string("continuous"));
            if (type == "discrete") r.discrete = true;
            else if (type != "continuous") throw InputError(path + ": range type must be 'discrete' or 'continuous'");
            r.lower = rj.at("lower").get<double>();
            r.upper = rj.at("upper").get<double>();
            if (r.discrete) r.increment = rj.at("increment").get<double>();
            r.validate();
            spec.ranges.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
    spec.budget.validate();
    if (spec.ranges.empty()) throw InputError(path + ": no ranges given");
    return spec;
}

inline void write_tune_trace(const std::string& path, const std::vector<TuneRecord>& trace) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path);
    out << "maxit,J,t_max,dc,l_max_pct,p_new,cost,seconds\n";
    for (const auto& rec : trace) {
        out << rec.config.maxit << ',' << rec.config.sequence_length << ',' << format_double(rec.config.t_max)
            << ',' << format_double(rec.config.decrement) << ',' << format_double(rec.config.l_max_pct) << ','
            << format_double(rec.config.p_new) << ',' << format_double(rec.cost) << ','
            << format_double(rec.seconds) << '\n';
    }
}

}  // namespace stratalloc::io
