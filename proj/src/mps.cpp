#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "apsems/errors.hpp"
#include "apsems/solver.hpp"

namespace apsems {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string num(double v) { return fmt::format("{:.17g}", v); }

char sense_code(Sense s) {
    switch (s) {
        case Sense::le: return 'L';
        case Sense::ge: return 'G';
        case Sense::eq: return 'E';
    }
    return 'E';
}

}  // namespace

void write_mps(const MilpModel& model, std::ostream& out) {
    model.validate();
    const std::string obj_name = "obj";
    out << "NAME " << model.name << "\n";
    out << "ROWS\n";
    out << " N " << obj_name << "\n";
    for (const auto& c : model.constraints) out << " " << sense_code(c.sense) << " " << c.name << "\n";

    // column-major entries: objective first, then rows in model order
    const auto n = static_cast<std::size_t>(model.num_vars());
    std::vector<std::vector<std::pair<int, double>>> cols(n);
    std::vector<double> obj(n, 0.0);
    std::vector<bool> has_obj(n, false);
    for (const auto& t : model.objective) {
        obj[static_cast<std::size_t>(t.var)] = t.coef;
        has_obj[static_cast<std::size_t>(t.var)] = true;
    }
    for (int i = 0; i < model.num_rows(); ++i) {
        for (const auto& t : model.constraints[static_cast<std::size_t>(i)].terms) {
            cols[static_cast<std::size_t>(t.var)].emplace_back(i, t.coef);
        }
    }
    out << "COLUMNS\n";
    bool in_int = false;
    int marker = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const auto& v = model.variables[j];
        const bool is_int = v.type == VarType::binary;
        if (is_int != in_int) {
            out << fmt::format("    MARKER{} 'MARKER' '{}'\n", marker++, is_int ? "INTORG" : "INTEND");
            in_int = is_int;
        }
        out << "    " << v.name << " " << obj_name << " " << num(has_obj[j] ? obj[j] : 0.0) << "\n";
        for (const auto& [row, coef] : cols[j]) {
            out << "    " << v.name << " " << model.constraints[static_cast<std::size_t>(row)].name << " " << num(coef) << "\n";
        }
    }
    if (in_int) out << fmt::format("    MARKER{} 'MARKER' 'INTEND'\n", marker++);

    out << "RHS\n";
    if (model.objective_offset != 0.0) out << "    RHS " << obj_name << " " << num(-model.objective_offset) << "\n";
    for (const auto& c : model.constraints) {
        if (c.rhs != 0.0) out << "    RHS " << c.name << " " << num(c.rhs) << "\n";
    }

    out << "BOUNDS\n";
    for (const auto& v : model.variables) {
        if (v.type == VarType::binary) {
            out << " BV BND " << v.name << "\n";
            if (v.lower != 0.0) out << " LO BND " << v.name << " " << num(v.lower) << "\n";
            if (v.upper != 1.0) out << " UP BND " << v.name << " " << num(v.upper) << "\n";
            continue;
        }
        if (v.lower == -kInf && v.upper == kInf) {
            out << " FR BND " << v.name << "\n";
            continue;
        }
        if (v.lower == v.upper) {
            out << " FX BND " << v.name << " " << num(v.lower) << "\n";
            continue;
        }
        if (v.lower == -kInf) {
            out << " MI BND " << v.name << "\n";
        } else if (v.lower != 0.0) {
            out << " LO BND " << v.name << " " << num(v.lower) << "\n";
        }
        if (v.upper != kInf) out << " UP BND " << v.name << " " << num(v.upper) << "\n";
    }

    if (!model.sos1_sets.empty()) {
        out << "SOS\n";
        for (const auto& s : model.sos1_sets) {
            out << " S1 SOS " << s.name << " 1\n";
            for (std::size_t p = 0; p < s.members.size(); ++p) {
                out << "    " << model.variables[static_cast<std::size_t>(s.members[p])].name << " " << num(s.weights[p]) << "\n";
            }
        }
    }
    out << "ENDATA\n";
}

void write_mps(const MilpModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_mps(model, out);
}

MilpModel read_mps(std::istream& in) {
    enum class Section { none, name, rows, columns, rhs, bounds, sos, end };
    MilpModel model;
    model.name.clear();
    std::string obj_row;
    std::unordered_map<std::string, int> row_index;
    std::unordered_map<std::string, int> col_index;
    Section section = Section::none;
    bool integer_block = false;
    std::size_t line_no = 0;
    std::string line;

    auto number = [&](const std::string& tok) {
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw ParseError(line_no, "expected a number, got '" + tok + "'");
        }
    };
    auto column = [&](const std::string& name) -> int {
        const auto it = col_index.find(name);
        if (it == col_index.end()) throw ParseError(line_no, "unknown column '" + name + "'");
        return it->second;
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '*') continue;
        std::istringstream ss(line);
        std::vector<std::string> tok;
        for (std::string t; ss >> t;) tok.push_back(t);
        if (tok.empty()) continue;

        if (line[0] != ' ' && line[0] != '\t') {
            const auto& kw = tok[0];
            if (kw == "NAME") {
                section = Section::name;
                model.name = tok.size() > 1 ? tok[1] : "";
            } else if (kw == "ROWS") {
                section = Section::rows;
            } else if (kw == "COLUMNS") {
                section = Section::columns;
            } else if (kw == "RHS") {
                section = Section::rhs;
            } else if (kw == "BOUNDS") {
                section = Section::bounds;
            } else if (kw == "SOS") {
                section = Section::sos;
            } else if (kw == "ENDATA") {
                section = Section::end;
                break;
            } else {
                throw ParseError(line_no, "unknown section '" + kw + "'");
            }
            if (tok.size() > 1 && section != Section::name) throw ParseError(line_no, "unexpected tokens after " + kw);
            continue;
        }

        switch (section) {
            case Section::none:
            case Section::name:
            case Section::end: throw ParseError(line_no, "data line outside a section");
            case Section::rows: {
                if (tok.size() != 2) throw ParseError(line_no, "ROWS entry needs a type and a name");
                const auto& type = tok[0];
                if (type == "N") {
                    if (!obj_row.empty()) throw ParseError(line_no, "more than one objective row");
                    obj_row = tok[1];
                    break;
                }
                Sense s;
                if (type == "L") {
                    s = Sense::le;
                } else if (type == "G") {
                    s = Sense::ge;
                } else if (type == "E") {
                    s = Sense::eq;
                } else {
                    throw ParseError(line_no, "unknown row type '" + type + "'");
                }
                if (!row_index.emplace(tok[1], model.num_rows()).second) throw ParseError(line_no, "duplicate row '" + tok[1] + "'");
                model.constraints.push_back({tok[1], {}, s, 0.0});
                break;
            }
            case Section::columns: {
                if (tok.size() == 3 && tok[1] == "'MARKER'") {
                    if (tok[2] == "'INTORG'") {
                        integer_block = true;
                    } else if (tok[2] == "'INTEND'") {
                        integer_block = false;
                    } else {
                        throw ParseError(line_no, "unknown marker " + tok[2]);
                    }
                    break;
                }
                if (tok.size() != 3 && tok.size() != 5) throw ParseError(line_no, "COLUMNS entry needs 1 or 2 (row, value) pairs");
                auto [it, fresh] = col_index.try_emplace(tok[0], model.num_vars());
                if (fresh) {
                    if (integer_block) {
                        model.add_binary(tok[0]);
                    } else {
                        model.add_variable(tok[0], 0.0, kInf);
                    }
                } else if (it->second != model.num_vars() - 1) {
                    throw ParseError(line_no, "column '" + tok[0] + "' entries are not contiguous");
                }
                const int j = it->second;
                for (std::size_t p = 1; p + 1 < tok.size(); p += 2) {
                    const double v = number(tok[p + 1]);
                    if (tok[p] == obj_row) {
                        if (v != 0.0) model.objective.push_back({j, v});
                        continue;
                    }
                    const auto r = row_index.find(tok[p]);
                    if (r == row_index.end()) throw ParseError(line_no, "unknown row '" + tok[p] + "'");
                    auto& terms = model.constraints[static_cast<std::size_t>(r->second)].terms;
                    if (!terms.empty() && terms.back().var == j) throw ParseError(line_no, "duplicate entry for row '" + tok[p] + "'");
                    terms.push_back({j, v});
                }
                break;
            }
            case Section::rhs: {
                if (tok.size() != 3 && tok.size() != 5) throw ParseError(line_no, "RHS entry needs 1 or 2 (row, value) pairs");
                for (std::size_t p = 1; p + 1 < tok.size(); p += 2) {
                    const double v = number(tok[p + 1]);
                    if (tok[p] == obj_row) {
                        model.objective_offset = -v;
                        continue;
                    }
                    const auto r = row_index.find(tok[p]);
                    if (r == row_index.end()) throw ParseError(line_no, "unknown row '" + tok[p] + "'");
                    model.constraints[static_cast<std::size_t>(r->second)].rhs = v;
                }
                break;
            }
            case Section::bounds: {
                if (tok.size() < 3) throw ParseError(line_no, "BOUNDS entry too short");
                const auto& type = tok[0];
                const int j = column(tok[2]);
                auto& var = model.variables[static_cast<std::size_t>(j)];
                const bool needs_value = type == "UP" || type == "LO" || type == "FX";
                if (needs_value != (tok.size() == 4)) throw ParseError(line_no, "bound " + type + " has the wrong number of fields");
                if (type == "UP") {
                    var.upper = number(tok[3]);
                } else if (type == "LO") {
                    var.lower = number(tok[3]);
                } else if (type == "FX") {
                    var.lower = var.upper = number(tok[3]);
                } else if (type == "FR") {
                    var.lower = -kInf;
                    var.upper = kInf;
                } else if (type == "MI") {
                    var.lower = -kInf;
                } else if (type == "PL") {
                    var.upper = kInf;
                } else if (type == "BV") {
                    var.type = VarType::binary;
                    var.lower = 0.0;
                    var.upper = 1.0;
                } else {
                    throw ParseError(line_no, "unknown bound type '" + type + "'");
                }
                break;
            }
            case Section::sos: {
                if (tok[0] == "S1") {
                    if (tok.size() != 4 || tok[1] != "SOS") throw ParseError(line_no, "SOS header must read 'S1 SOS <name> <priority>'");
                    model.sos1_sets.push_back({tok[2], {}, {}});
                    break;
                }
                if (tok[0] == "S2") throw ParseError(line_no, "SOS2 sets are not supported");
                if (model.sos1_sets.empty()) throw ParseError(line_no, "SOS member before any set header");
                if (tok.size() != 2) throw ParseError(line_no, "SOS member needs a column and a weight");
                auto& set = model.sos1_sets.back();
                set.members.push_back(column(tok[0]));
                set.weights.push_back(number(tok[1]));
                break;
            }
        }
    }
    if (section != Section::end) throw ParseError(line_no, "missing ENDATA");
    if (obj_row.empty()) throw ParseError(line_no, "no objective row");
    try {
        model.validate();
    } catch (const BuildError& e) {
        throw ParseError(line_no, e.what());
    }
    return model;
}

MilpModel read_mps(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(0, "cannot open " + path.string());
    return read_mps(in);
}

}  // namespace apsems
