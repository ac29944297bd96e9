// bhv: treespace toolkit front end.
//
// Subcommands: dist, geodesic, mean, check-mean, conditions, logmap.
// Exit codes: 0 success, 1 usage error, 2 input parse error,
// 3 numeric/verification failure.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <bhv/bhv.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string path;
    double tol = 1e-8;
    std::size_t max_iter = 100000;
    std::uint64_t seed = 0;
    std::size_t direction_budget = 64;
    std::string format = "text";
    std::vector<int> pair;  // empty or two indices
    double lambda = -1.0;   // < 0: not requested
    int base = 0;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw bhv::ParseError("cannot open input file: " + path, 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t thread_cap() {
    std::size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("BHV_THREADS")) {
        const long v = std::atol(env);
        if (v >= 1 && static_cast<std::size_t>(v) < hw) hw = static_cast<std::size_t>(v);
    }
    return hw;
}

// Numbers are printed with 12 significant digits everywhere so identical
// invocations produce byte-identical output.
std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// Human-facing variant: bare integers get a trailing ".0".
std::string fmt_point(double v) {
    std::string s = fmt(v);
    if (s.find_first_not_of("-0123456789") == std::string::npos) s += ".0";
    return s;
}

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

std::string jstr(const std::string& s) { return "\"" + json_escape(s) + "\""; }

// "A,B|C,D,E": the side containing the first taxon comes first; labels in
// taxon-set order. Deterministic and readable.
std::string split_name(const bhv::Split& s) {
    const auto& taxa = s.taxa();
    const std::uint64_t first_side =
        (s.side() & 1u) ? s.side() : s.other_side();
    auto side_labels = [&](std::uint64_t mask) {
        std::string out;
        for (std::size_t i = 0; i < taxa->size(); ++i)
            if ((mask >> i) & 1u) {
                if (!out.empty()) out += ",";
                out += taxa->label(i);
            }
        return out;
    };
    return side_labels(first_side) + "|" + side_labels(~first_side & (s.side() | s.other_side()));
}

std::string splits_json(const bhv::SplitSet& set) {
    std::string out = "[";
    bool first = true;
    for (const bhv::Split& s : set) {
        if (!first) out += ",";
        first = false;
        out += jstr(split_name(s));
    }
    return out + "]";
}

std::string splits_text(const bhv::SplitSet& set) {
    std::string out;
    for (const bhv::Split& s : set) {
        if (!out.empty()) out += "  ";
        out += split_name(s);
    }
    return out.empty() ? "(none)" : out;
}

bhv::NewickDocument load(const RunConfig& cfg) {
    return bhv::parse_newick(read_file(cfg.path));
}

void require_index(int idx, std::size_t n, const char* what) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= n)
        throw UsageError(std::string(what) + " index out of range (have " +
                         std::to_string(n) + " trees)");
}

// ---- dist ----

int cmd_dist(const RunConfig& cfg) {
    const bhv::NewickDocument doc = load(cfg);
    const std::size_t n = doc.trees.size();

    if (!cfg.pair.empty()) {
        require_index(cfg.pair[0], n, "pair");
        require_index(cfg.pair[1], n, "pair");
        const double d = bhv::distance(doc.trees[static_cast<std::size_t>(cfg.pair[0])],
                                       doc.trees[static_cast<std::size_t>(cfg.pair[1])]);
        if (cfg.format == "json")
            std::cout << "{\"n\":" << n << ",\"pair\":[" << cfg.pair[0] << ","
                      << cfg.pair[1] << "],\"distance\":" << fmt(d) << "}\n";
        else
            std::cout << fmt_point(d) << "\n";
        return kExitOk;
    }

    if (n < 2) throw UsageError("dist needs at least two trees (or --pair)");

    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    std::vector<std::pair<std::size_t, std::size_t>> tasks;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) tasks.emplace_back(i, j);
    const std::size_t workers = std::min(thread_cap(), tasks.size());
    if (workers > 1) {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t t = w; t < tasks.size(); t += workers) {
                    const auto [i, j] = tasks[t];
                    m[i][j] = m[j][i] = bhv::distance(doc.trees[i], doc.trees[j]);
                }
            });
        for (std::thread& th : pool) th.join();
    } else {
        for (const auto& [i, j] : tasks)
            m[i][j] = m[j][i] = bhv::distance(doc.trees[i], doc.trees[j]);
    }

    if (cfg.format == "json") {
        std::string out = "{\"n\":" + std::to_string(n) + ",\"distances\":[";
        for (std::size_t i = 0; i < n; ++i) {
            if (i) out += ",";
            out += "[";
            for (std::size_t j = 0; j < n; ++j) {
                if (j) out += ",";
                out += fmt(m[i][j]);
            }
            out += "]";
        }
        std::cout << out << "]}\n";
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j)
                std::cout << (j ? " " : "") << fmt(m[i][j]);
            std::cout << "\n";
        }
    }
    return kExitOk;
}

// ---- geodesic ----

int cmd_geodesic(const RunConfig& cfg) {
    const bhv::NewickDocument doc = load(cfg);
    const std::size_t n = doc.trees.size();
    int i = 0, j = 1;
    if (!cfg.pair.empty()) {
        i = cfg.pair[0];
        j = cfg.pair[1];
    } else if (n != 2) {
        throw UsageError("geodesic needs --pair i j unless the file has exactly two trees");
    }
    require_index(i, n, "pair");
    require_index(j, n, "pair");
    if (cfg.lambda >= 0.0 && cfg.lambda > 1.0)
        throw UsageError("--lambda must lie in [0, 1]");

    const bhv::GeodesicPath path = bhv::geodesic(
        doc.trees[static_cast<std::size_t>(i)], doc.trees[static_cast<std::size_t>(j)]);
    const bhv::Support& sup = path.support();

    std::optional<std::string> point_newick;
    if (cfg.lambda >= 0.0)
        point_newick = bhv::write_newick(bhv::point_along(path, cfg.lambda));

    if (cfg.format == "json") {
        std::string out = "{\"pair\":[" + std::to_string(i) + "," + std::to_string(j) +
                          "],\"distance\":" + fmt(path.length()) + ",\"common\":[";
        for (std::size_t c = 0; c < sup.common.size(); ++c) {
            if (c) out += ",";
            out += "{\"split\":" + jstr(split_name(sup.common[c].split)) +
                   ",\"source_weight\":" + fmt(sup.common[c].w_source) +
                   ",\"target_weight\":" + fmt(sup.common[c].w_target) + "}";
        }
        out += "],\"support\":[";
        for (std::size_t p = 0; p < sup.pairs.size(); ++p) {
            if (p) out += ",";
            out += "{\"a\":[";
            for (std::size_t a = 0; a < sup.pairs[p].a.size(); ++a) {
                if (a) out += ",";
                out += jstr(split_name(sup.pairs[p].a[a]));
            }
            out += "],\"b\":[";
            for (std::size_t b = 0; b < sup.pairs[p].b.size(); ++b) {
                if (b) out += ",";
                out += jstr(split_name(sup.pairs[p].b[b]));
            }
            out += "]}";
        }
        out += "]";
        if (point_newick) {
            out += ",\"lambda\":" + fmt(cfg.lambda) +
                   ",\"point_newick\":" + jstr(*point_newick);
        }
        std::cout << out << "}\n";
    } else {
        std::cout << "distance " << fmt_point(path.length()) << "\n";
        for (const bhv::CommonSplit& c : sup.common)
            std::cout << "common " << split_name(c.split) << " " << fmt(c.w_source)
                      << " -> " << fmt(c.w_target) << "\n";
        for (std::size_t p = 0; p < sup.pairs.size(); ++p) {
            std::cout << "exchange " << (p + 1) << ":";
            for (const bhv::Split& s : sup.pairs[p].a) std::cout << " " << split_name(s);
            std::cout << "  ->";
            for (const bhv::Split& s : sup.pairs[p].b) std::cout << " " << split_name(s);
            std::cout << "\n";
        }
        if (point_newick)
            std::cout << "point(" << fmt(cfg.lambda) << ") " << *point_newick << "\n";
    }
    return kExitOk;
}

// ---- shared report pieces ----

std::string sigma_json(const std::map<bhv::Split, double>& sigma) {
    std::string out = "{";
    bool first = true;
    for (const auto& [s, v] : sigma) {
        if (!first) out += ",";
        first = false;
        out += jstr(split_name(s)) + ":" + fmt(v);
    }
    return out + "}";
}

bool set_in(const std::vector<bhv::SplitSet>& sets, const bhv::SplitSet& s) {
    return std::find(sets.begin(), sets.end(), s) != sets.end();
}

std::string conditions_json(const bhv::ConditionsReport& rep) {
    std::string out = "{\"sigma\":" + sigma_json(rep.sigma);
    out += ",\"must_include\":" + splits_json(rep.must_include);
    out += ",\"ssd\":[";
    bool first = true;
    for (const auto& [cand, v] : rep.ssd_by_candidate) {
        if (!first) out += ",";
        first = false;
        out += "{\"splits\":" + splits_json(cand) + ",\"value\":" + fmt(v) +
               ",\"surviving\":" +
               (set_in(rep.surviving_orthants, cand) ? "true" : "false") + "}";
    }
    out += "],\"surviving_orthants\":[";
    for (std::size_t i = 0; i < rep.surviving_orthants.size(); ++i) {
        if (i) out += ",";
        out += splits_json(rep.surviving_orthants[i]);
    }
    return out + "]}";
}

void conditions_text(const bhv::ConditionsReport& rep, std::ostream& os) {
    os << "split sums:\n";
    for (const auto& [s, v] : rep.sigma)
        os << "  " << split_name(s) << "  " << fmt(v) << "\n";
    os << "must include: " << splits_text(rep.must_include) << "\n";
    for (const auto& [cand, v] : rep.ssd_by_candidate) {
        const bool alive = set_in(rep.surviving_orthants, cand);
        os << (alive ? "surviving" : "excluded ") << "  ssd " << fmt(v) << "  {"
           << splits_text(cand) << "}";
        if (!alive)
            os << "  (square-sum difference <= 0: the mean's split set cannot "
                  "contain this candidate)";
        os << "\n";
    }
    if (rep.enumeration_truncated)
        os << "warning: candidate enumeration truncated\n";
}

// ---- mean ----

int cmd_mean(const RunConfig& cfg) {
    const bhv::NewickDocument doc = load(cfg);
    bhv::MeanOptions opt;
    opt.max_iter = cfg.max_iter;
    opt.seed = cfg.seed;
    opt.tol = cfg.tol;
    opt.direction_budget = cfg.direction_budget;
    const bhv::MeanResult res = bhv::mean(doc.trees, opt);
    const double f = bhv::frechet_value(res.mean, doc.trees);
    const std::string newick = bhv::write_newick(res.mean);

    if (cfg.format == "json") {
        std::string out = "{\"mean_newick\":" + jstr(newick);
        out += ",\"frechet_value\":" + fmt(f);
        out += ",\"certificate\":{\"verdict\":" +
               jstr(bhv::to_string(res.certificate.verdict)) +
               ",\"residual\":" + fmt(res.certificate.condition_ii_residual) + "}";
        out += ",\"conditions\":" + conditions_json(res.conditions) + "}";
        std::cout << out << "\n";
    } else {
        std::cout << "mean " << newick << "\n";
        std::cout << "frechet value " << fmt(f) << "\n";
        std::cout << "verdict " << bhv::to_string(res.certificate.verdict)
                  << " (residual " << fmt(res.certificate.condition_ii_residual)
                  << ")\n";
        conditions_text(res.conditions, std::cout);
    }
    return res.certificate.verdict == bhv::Verdict::fail ? kExitNumeric : kExitOk;
}

// ---- check-mean ----

int cmd_check_mean(const RunConfig& cfg) {
    const bhv::NewickDocument doc = load(cfg);
    const std::size_t n = doc.trees.size();
    require_index(cfg.base, n, "base");
    if (n < 2) throw UsageError("check-mean needs the candidate plus at least one input tree");
    const bhv::Tree candidate = doc.trees[static_cast<std::size_t>(cfg.base)];
    std::vector<bhv::Tree> inputs;
    for (std::size_t k = 0; k < n; ++k)
        if (k != static_cast<std::size_t>(cfg.base)) inputs.push_back(doc.trees[k]);

    const bhv::MeanCertificate cert =
        bhv::verify_mean(candidate, inputs, cfg.tol, cfg.direction_budget);

    if (cfg.format == "json") {
        std::string out = "{\"candidate_newick\":" + jstr(bhv::write_newick(candidate));
        out += ",\"verdict\":" + jstr(bhv::to_string(cert.verdict));
        out += ",\"residual\":" + fmt(cert.condition_ii_residual);
        out += ",\"checks\":[";
        for (std::size_t c = 0; c < cert.condition_i_checks.size(); ++c) {
            if (c) out += ",";
            out += "{\"splits\":" +
                   splits_json(cert.condition_i_checks[c].direction.extension) +
                   ",\"value\":" + fmt(cert.condition_i_checks[c].value) + "}";
        }
        std::cout << out << "]}\n";
    } else {
        std::cout << "verdict " << bhv::to_string(cert.verdict) << " (residual "
                  << fmt(cert.condition_ii_residual) << ")\n";
        for (const bhv::ConditionCheck& c : cert.condition_i_checks)
            std::cout << "direction {" << splits_text(c.direction.extension) << "}  "
                      << fmt(c.value) << "\n";
    }
    return cert.verdict == bhv::Verdict::fail ? kExitNumeric : kExitOk;
}

// ---- conditions ----

int cmd_conditions(const RunConfig& cfg) {
    const bhv::NewickDocument doc = load(cfg);
    const bhv::ConditionsReport rep = bhv::prune_orthants(doc.trees);
    if (cfg.format == "json")
        std::cout << conditions_json(rep) << "\n";
    else
        conditions_text(rep, std::cout);
    return kExitOk;
}

// ---- logmap ----

int cmd_logmap(const RunConfig& cfg) {
    const bhv::NewickDocument doc = load(cfg);
    const std::size_t n = doc.trees.size();
    require_index(cfg.base, n, "base");
    const bhv::Tree& base = doc.trees[static_cast<std::size_t>(cfg.base)];
    const bhv::TangentVector origin = bhv::base_coordinates(base);

    std::string json = "{\"base\":" + std::to_string(cfg.base) + ",\"maps\":[";
    bool first = true;
    for (std::size_t k = 0; k < n; ++k) {
        if (k == static_cast<std::size_t>(cfg.base)) continue;
        const bhv::TangentVector v = bhv::log_map(doc.trees[k], base);
        const double translated = (v - origin).norm();
        const double d = bhv::distance(base, doc.trees[k]);
        if (cfg.format == "json") {
            if (!first) json += ",";
            first = false;
            json += "{\"index\":" + std::to_string(k) + ",\"coords\":{";
            bool fc = true;
            for (const auto& [s, val] : v.interior().coords()) {
                if (!fc) json += ",";
                fc = false;
                json += jstr(split_name(s)) + ":" + fmt(val);
            }
            json += "},\"pendants\":[";
            for (std::size_t p = 0; p < v.pendant().size(); ++p) {
                if (p) json += ",";
                json += fmt(v.pendant()[p]);
            }
            json += "],\"norm_from_base\":" + fmt(translated) +
                    ",\"distance\":" + fmt(d) + "}";
        } else {
            std::cout << "tree " << k << "  distance " << fmt(d)
                      << "  norm-from-base " << fmt(translated) << "\n";
            for (const auto& [s, val] : v.interior().coords())
                std::cout << "  " << split_name(s) << "  " << fmt(val) << "\n";
        }
    }
    if (cfg.format == "json") std::cout << json << "]}\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"treespace geodesics, means, and membership conditions"};
    app.require_subcommand(1);

    RunConfig cfg;
    const std::vector<std::string> names = {"dist",       "geodesic", "mean",
                                            "check-mean", "conditions", "logmap"};
    const std::vector<std::string> descriptions = {
        "pairwise geodesic distances",
        "geodesic between two trees (support, optional point along it)",
        "Frechet mean with certificate and condition report",
        "verify a candidate mean against the other trees in the file",
        "split-membership screens: split sums, must-include set, "
        "square-sum differences per orthant",
        "log maps of all trees at a base tree"};
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < names.size(); ++i) {
        CLI::App* sub = app.add_subcommand(names[i], descriptions[i]);
        sub->add_option("file", cfg.path, "Newick input, one tree per line")
            ->required();
        sub->add_option("--tol", cfg.tol, "numeric tolerance");
        sub->add_option("--max-iter", cfg.max_iter, "iteration budget for the mean");
        sub->add_option("--seed", cfg.seed, "random seed");
        sub->add_option("--direction-budget", cfg.direction_budget,
                        "sampled directions in mean verification");
        sub->add_option("--format", cfg.format, "output format")
            ->check(CLI::IsMember({"json", "text"}));
        if (names[i] == "dist" || names[i] == "geodesic")
            sub->add_option("--pair", cfg.pair, "tree indices i j")->expected(2);
        if (names[i] == "geodesic")
            sub->add_option("--lambda", cfg.lambda,
                            "evaluate the geodesic at this fraction [0,1]");
        if (names[i] == "check-mean" || names[i] == "logmap")
            sub->add_option("--base", cfg.base, "index of the base/candidate tree");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (subs[0]->parsed()) return cmd_dist(cfg);
        if (subs[1]->parsed()) return cmd_geodesic(cfg);
        if (subs[2]->parsed()) return cmd_mean(cfg);
        if (subs[3]->parsed()) return cmd_check_mean(cfg);
        if (subs[4]->parsed()) return cmd_conditions(cfg);
        if (subs[5]->parsed()) return cmd_logmap(cfg);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const bhv::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}
