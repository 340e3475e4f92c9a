#include "lda/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lda/errors.hpp"

namespace lda {

namespace {

std::string trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail(const std::string& origin, std::size_t line, const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& origin, std::size_t line, const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (trim(s.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    fail(origin, line, "expected a number, got '" + s + "'");
}

long long parse_int(const std::string& origin, std::size_t line, const std::string& s) {
    const std::string t = trim(s);
    long long v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size())
        fail(origin, line, "expected an integer, got '" + s + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& origin, std::size_t line, const std::string& s) {
    const std::string t = trim(s);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size())
        fail(origin, line, "expected an unsigned integer, got '" + s + "'");
    return v;
}

bool parse_bool(const std::string& origin, std::size_t line, const std::string& s) {
    const std::string t = trim(s);
    if (t == "true" || t == "yes" || t == "1") return true;
    if (t == "false" || t == "no" || t == "0") return false;
    fail(origin, line, "expected true/false, got '" + s + "'");
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<double> parse_double_list(const std::string& origin, std::size_t line,
                                      const std::string& s) {
    std::vector<double> out;
    for (const auto& tok : split_ws(s)) out.push_back(parse_double(origin, line, tok));
    if (out.empty()) fail(origin, line, "expected at least one number");
    return out;
}

std::vector<int> parse_int_list(const std::string& origin, std::size_t line,
                                const std::string& s) {
    std::vector<int> out;
    for (const auto& tok : split_ws(s))
        out.push_back(static_cast<int>(parse_int(origin, line, tok)));
    if (out.empty()) fail(origin, line, "expected at least one integer");
    return out;
}

// "name(a, b, ...)" -> {name, args}; domain errors surface with the line number
struct Call {
    std::string name;
    std::vector<double> args;
};

Call parse_call(const std::string& origin, std::size_t line, const std::string& s) {
    const auto open = s.find('(');
    const auto close = s.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open ||
        !trim(s.substr(close + 1)).empty())
        fail(origin, line, "expected name(arg, ...), got '" + s + "'");
    Call call;
    call.name = trim(s.substr(0, open));
    std::string args = s.substr(open + 1, close - open - 1);
    if (!trim(args).empty()) {
        std::istringstream in(args);
        std::string piece;
        while (std::getline(in, piece, ','))
            call.args.push_back(parse_double(origin, line, trim(piece)));
    }
    return call;
}

void need_args(const std::string& origin, std::size_t line, const Call& c, std::size_t n) {
    if (c.args.size() != n)
        fail(origin, line,
             "'" + c.name + "' takes " + std::to_string(n) + " arguments, got " +
                 std::to_string(c.args.size()));
}

FrequencyModel parse_frequency(const std::string& origin, std::size_t line,
                               const std::string& s) {
    const Call c = parse_call(origin, line, s);
    try {
        if (c.name == "poisson") {
            need_args(origin, line, c, 1);
            return FrequencyModel::poisson(c.args[0]);
        }
        if (c.name == "negbinomial") {
            need_args(origin, line, c, 2);
            return FrequencyModel::neg_binomial(c.args[0], c.args[1]);
        }
        if (c.name == "binomial") {
            need_args(origin, line, c, 2);
            return FrequencyModel::binomial(static_cast<int>(c.args[0]), c.args[1]);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        fail(origin, line, std::string(e.what()));
    }
    fail(origin, line, "unknown frequency family '" + c.name + "'");
}

SeverityModel parse_severity(const std::string& origin, std::size_t line, const std::string& s) {
    const Call c = parse_call(origin, line, s);
    try {
        if (c.name == "lognormal") {
            need_args(origin, line, c, 2);
            return SeverityModel::lognormal(c.args[0], c.args[1]);
        }
        if (c.name == "gpd") {
            need_args(origin, line, c, 2);
            return SeverityModel::gpd(c.args[0], c.args[1]);
        }
        if (c.name == "gandh") {
            need_args(origin, line, c, 4);
            return SeverityModel::g_and_h(c.args[0], c.args[1], c.args[2], c.args[3]);
        }
        if (c.name == "gb2") {
            need_args(origin, line, c, 4);
            return SeverityModel::gb2(c.args[0], c.args[1], c.args[2], c.args[3]);
        }
        if (c.name == "gcd") {
            need_args(origin, line, c, 3);
            return SeverityModel::gcd(c.args[0], c.args[1], c.args[2]);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        fail(origin, line, std::string(e.what()));
    }
    fail(origin, line, "unknown severity family '" + c.name + "'");
}

ProfileMarginal parse_marginal(const std::string& origin, std::size_t line,
                               const std::string& s) {
    const Call c = parse_call(origin, line, s);
    try {
        if (c.name == "constant") {
            need_args(origin, line, c, 1);
            return ProfileMarginal::constant(c.args[0]);
        }
        if (c.name == "gamma") {
            need_args(origin, line, c, 2);
            return ProfileMarginal::gamma(c.args[0], c.args[1]);
        }
        if (c.name == "normal") {
            need_args(origin, line, c, 2);
            return ProfileMarginal::normal(c.args[0], c.args[1]);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        fail(origin, line, std::string(e.what()));
    }
    fail(origin, line, "unknown marginal '" + c.name + "'");
}

AggMethod parse_method(const std::string& origin, std::size_t line, const std::string& s) {
    if (s == "mc") return AggMethod::MC;
    if (s == "panjer") return AggMethod::Panjer;
    if (s == "fft") return AggMethod::FFT;
    if (s == "single_loss") return AggMethod::SingleLoss;
    if (s == "moment_match") return AggMethod::MomentMatch;
    fail(origin, line, "unknown method '" + s + "'");
}

GammaPrior parse_prior(const std::string& origin, std::size_t line, const std::string& s) {
    const Call c = parse_call(origin, line, s);
    try {
        if (c.name == "gamma") {
            need_args(origin, line, c, 2);
            return GammaPrior(c.args[0], c.args[1]);
        }
        if (c.name == "elicit") { // mean, a, b, coverage of [a, b]
            need_args(origin, line, c, 4);
            return elicit_gamma_prior(c.args[0], c.args[1], c.args[2], c.args[3]);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        fail(origin, line, std::string(e.what()));
    }
    fail(origin, line, "unknown prior '" + c.name + "'");
}

enum class Section { Top, Cell, Aggregate, Capital, Dependence, Bias, Combine };

} // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    bool seed_seen = false;
    Section section = Section::Top;
    CellConfig* cell = nullptr;

    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail(origin, line_no, "unterminated section header");
            const auto tokens = split_ws(trim(line.substr(1, line.size() - 2)));
            if (tokens.empty()) fail(origin, line_no, "empty section header");
            const std::string& kind = tokens[0];
            if (kind == "cell") {
                if (tokens.size() != 2) fail(origin, line_no, "[cell] needs exactly one label");
                for (const auto& existing : cfg.cells)
                    if (existing.label == tokens[1])
                        fail(origin, line_no, "duplicate cell label '" + tokens[1] + "'");
                cfg.cells.push_back(CellConfig{});
                cfg.cells.back().label = tokens[1];
                cell = &cfg.cells.back();
                section = Section::Cell;
            } else if (tokens.size() != 1) {
                fail(origin, line_no, "section '" + kind + "' takes no arguments");
            } else if (kind == "aggregate") {
                section = Section::Aggregate;
            } else if (kind == "capital") {
                section = Section::Capital;
            } else if (kind == "dependence") {
                section = Section::Dependence;
            } else if (kind == "bias") {
                section = Section::Bias;
            } else if (kind == "combine") {
                section = Section::Combine;
            } else {
                fail(origin, line_no, "unknown section '" + kind + "'");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(origin, line_no, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) fail(origin, line_no, "expected 'key = value'");

        switch (section) {
        case Section::Top:
            if (key == "command") {
                cfg.command = value;
            } else if (key == "seed") {
                cfg.seed = parse_u64(origin, line_no, value);
                seed_seen = true;
            } else if (key == "output") {
                cfg.output = value;
            } else if (key == "threads") {
                cfg.threads = static_cast<int>(parse_int(origin, line_no, value));
                if (cfg.threads < 1) fail(origin, line_no, "threads must be at least 1");
            } else {
                fail(origin, line_no, "unknown key '" + key + "'");
            }
            break;
        case Section::Cell:
            if (key == "frequency") {
                cell->frequency = parse_frequency(origin, line_no, value);
            } else if (key == "severity") {
                cell->severity = parse_severity(origin, line_no, value);
            } else if (key == "policy") {
                const Call c = parse_call(origin, line_no, value);
                if (c.name != "cover") fail(origin, line_no, "policy must be cover(D, U)");
                need_args(origin, line_no, c, 2);
                if (c.args[0] < 0.0 || c.args[1] < 0.0)
                    fail(origin, line_no, "cover layer must be non-negative");
                cell->policy = InsurancePolicy{c.args[0], c.args[1]};
            } else if (key == "data") {
                cell->data_path = value;
            } else if (key == "threshold") {
                cell->threshold = parse_double(origin, line_no, value);
                if (cell->threshold < 0.0)
                    fail(origin, line_no, "threshold must be non-negative");
            } else if (key == "family") {
                if (value == "lognormal")
                    cell->family = FitSevFamily::Lognormal;
                else if (value == "gpd")
                    cell->family = FitSevFamily::GPD;
                else if (value == "gb2")
                    cell->family = FitSevFamily::GB2;
                else if (value == "gcd")
                    cell->family = FitSevFamily::GCD;
                else if (value == "gandh")
                    cell->family = FitSevFamily::GandH;
                else
                    fail(origin, line_no, "unknown fit family '" + value + "'");
            } else if (key == "intensity") {
                cell->intensity = parse_marginal(origin, line_no, value);
            } else if (key == "log_mean") {
                cell->log_mean = parse_marginal(origin, line_no, value);
            } else if (key == "log_sd") {
                cell->log_sd = parse_double(origin, line_no, value);
                if (!(cell->log_sd > 0.0)) fail(origin, line_no, "log_sd must be positive");
            } else {
                fail(origin, line_no, "unknown key '" + key + "' in [cell]");
            }
            break;
        case Section::Aggregate:
            if (key == "methods") {
                cfg.aggregate.methods.clear();
                for (const auto& tok : split_ws(value))
                    cfg.aggregate.methods.push_back(parse_method(origin, line_no, tok));
            } else if (key == "quantiles") {
                cfg.aggregate.quantiles = parse_double_list(origin, line_no, value);
            } else if (key == "mc_draws") {
                cfg.aggregate.mc_draws = parse_u64(origin, line_no, value);
            } else if (key == "grid") {
                cfg.aggregate.grid = parse_u64(origin, line_no, value);
            } else if (key == "theta") {
                cfg.aggregate.theta = parse_double(origin, line_no, value);
            } else if (key == "write_density") {
                cfg.aggregate.write_density = parse_bool(origin, line_no, value);
            } else {
                fail(origin, line_no, "unknown key '" + key + "' in [aggregate]");
            }
            break;
        case Section::Capital:
            if (key == "method") {
                cfg.capital.method = parse_method(origin, line_no, value);
            } else if (key == "quantile") {
                cfg.capital.quantile = parse_double(origin, line_no, value);
            } else if (key == "confidence") {
                cfg.capital.confidence = parse_double(origin, line_no, value);
            } else if (key == "mc_draws") {
                cfg.capital.mc_draws = parse_u64(origin, line_no, value);
            } else if (key == "grid") {
                cfg.capital.grid = parse_u64(origin, line_no, value);
            } else if (key == "subtract_expected_loss") {
                cfg.capital.subtract_expected_loss = parse_bool(origin, line_no, value);
            } else if (key == "loss_rho") {
                cfg.capital.loss_rho = parse_double(origin, line_no, value);
            } else {
                fail(origin, line_no, "unknown key '" + key + "' in [capital]");
            }
            break;
        case Section::Dependence:
            if (key == "construction") {
                if (value != "frequency_copula" && value != "interarrival" &&
                    value != "profiles")
                    fail(origin, line_no, "unknown construction '" + value + "'");
                cfg.dependence.construction = value;
            } else if (key == "channel") {
                if (value != "intensity" && value != "location" && value != "both")
                    fail(origin, line_no, "channel must be intensity, location or both");
                cfg.dependence.channel = value;
            } else if (key == "rhos") {
                cfg.dependence.rhos = parse_double_list(origin, line_no, value);
            } else if (key == "years") {
                cfg.dependence.years = parse_u64(origin, line_no, value);
            } else {
                fail(origin, line_no, "unknown key '" + key + "' in [dependence]");
            }
            break;
        case Section::Bias:
            if (key == "lambda") {
                cfg.bias.lambda = parse_double(origin, line_no, value);
            } else if (key == "mu") {
                cfg.bias.mu = parse_double(origin, line_no, value);
            } else if (key == "sigma") {
                cfg.bias.sigma = parse_double(origin, line_no, value);
            } else if (key == "years") {
                cfg.bias.years = parse_int_list(origin, line_no, value);
            } else if (key == "replications") {
                cfg.bias.replications = static_cast<int>(parse_int(origin, line_no, value));
            } else if (key == "simulations") {
                cfg.bias.simulations = parse_u64(origin, line_no, value);
            } else {
                fail(origin, line_no, "unknown key '" + key + "' in [bias]");
            }
            break;
        case Section::Combine:
            if (key == "prior") {
                cfg.combine.prior = parse_prior(origin, line_no, value);
            } else if (key == "counts") {
                cfg.combine.counts = parse_int_list(origin, line_no, value);
            } else if (key == "experts") {
                cfg.combine.experts = parse_double_list(origin, line_no, value);
            } else if (key == "expert_xi") {
                cfg.combine.expert_xi = parse_double(origin, line_no, value);
            } else if (key == "mcmc_iterations") {
                cfg.combine.mcmc_iterations = parse_u64(origin, line_no, value);
            } else {
                fail(origin, line_no, "unknown key '" + key + "' in [combine]");
            }
            break;
        }
    }

    if (cfg.command.empty()) throw ConfigError(origin + ": missing 'command'");
    const bool known = cfg.command == "fit" || cfg.command == "aggregate" ||
                       cfg.command == "capital" || cfg.command == "dependence-study" ||
                       cfg.command == "bias-study" || cfg.command == "combine";
    if (!known) throw ConfigError(origin + ": unknown command '" + cfg.command + "'");
    if (!seed_seen)
        throw ConfigError(origin + ": missing 'seed' (runs must be reproducible)");
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

LossIngest ingest_losses_text(const std::string& text, double threshold,
                              const std::string& origin) {
    struct Row {
        int period;
        double amount;
    };
    std::map<std::string, std::vector<Row>> rows;

    LossIngest out;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("period", 0) == 0) continue; // header

        std::vector<std::string> fields;
        std::istringstream split(line);
        std::string piece;
        while (std::getline(split, piece, ',')) fields.push_back(trim(piece));
        if (fields.size() != 2 && fields.size() != 3)
            throw DataError(origin + ":" + std::to_string(line_no) +
                            ": expected 'period,amount' or 'period,cell,amount'");
        int period = 0;
        double amount = 0.0;
        try {
            std::size_t used = 0;
            period = std::stoi(fields[0], &used);
            if (!trim(fields[0].substr(used)).empty()) throw std::invalid_argument(fields[0]);
            amount = std::stod(fields.back(), &used);
            if (!trim(fields.back().substr(used)).empty())
                throw std::invalid_argument(fields.back());
        } catch (const std::exception&) {
            throw DataError(origin + ":" + std::to_string(line_no) + ": malformed row '" +
                            line + "'");
        }
        if (!(amount > 0.0))
            throw DataError(origin + ":" + std::to_string(line_no) +
                            ": loss amounts must be positive");
        if (amount < threshold) {
            ++out.rejected_below_threshold;
            continue;
        }
        const std::string label = fields.size() == 3 ? fields[1] : std::string{};
        rows[label].push_back({period, amount});
        ++out.accepted;
    }

    for (auto& [label, list] : rows) {
        int lo = list.front().period, hi = list.front().period;
        for (const Row& r : list) {
            lo = std::min(lo, r.period);
            hi = std::max(hi, r.period);
        }
        LossRecord rec;
        rec.amounts.assign(static_cast<std::size_t>(hi - lo + 1), {});
        for (const Row& r : list)
            rec.amounts[static_cast<std::size_t>(r.period - lo)].push_back(r.amount);
        out.cells.emplace(label, std::move(rec));
    }
    return out;
}

LossIngest ingest_losses(const std::string& path, double threshold) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open loss file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return ingest_losses_text(buf.str(), threshold, path);
}

} // namespace lda
