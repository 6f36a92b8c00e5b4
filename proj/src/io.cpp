#include "thermo/io.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace thermo {

namespace {

std::string compose(const std::string& source, int line, const std::string& message) {
    if (line > 0) return source + ":" + std::to_string(line) + ": " + message;
    return source + ": " + message;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string strip_comment(const std::string& s) {
    const auto hash = s.find_first_of("#;");
    return trim(hash == std::string::npos ? s : s.substr(0, hash));
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

// Locale-independent strict parse; the whole token must be consumed.
std::optional<double> parse_double(const std::string& token) {
    double value = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    if (begin != end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return value;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot open file");
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(compose(source, line, message)), source_(source), line_(line), message_(message) {}

// Spectrum ---------------------------------------------------------------------

Spectrum parse_spectrum(std::istream& in, const std::string& source) {
    std::vector<std::pair<double, double>> levels;
    int first_line = 0;
    int number = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++number;
        const std::string line = strip_comment(raw);
        if (line.empty()) continue;
        const auto tokens = split_ws(line);
        if (tokens.size() != 2) throw ConfigError(source, number, "expected `energy degeneracy`");
        const auto e = parse_double(tokens[0]);
        const auto d = parse_double(tokens[1]);
        if (!e || !std::isfinite(*e)) throw ConfigError(source, number, "invalid energy '" + tokens[0] + "'");
        if (!d || !(*d >= 1.0) || std::floor(*d) != *d || !std::isfinite(*d)) {
            throw ConfigError(source, number, "degeneracy must be a positive integer, got '" + tokens[1] + "'");
        }
        if (levels.empty()) {
            first_line = number;
            if (*e != 0.0) throw ConfigError(source, number, "first energy must be 0");
        } else if (!(*e > levels.back().first)) {
            throw ConfigError(source, number, "energies must be strictly ascending");
        }
        levels.emplace_back(*e, *d);
    }
    if (levels.empty()) throw ConfigError(source, first_line, "no levels");
    return Spectrum::from_levels(levels);
}

Spectrum read_spectrum(const std::string& path) {
    auto in = open_input(path);
    return parse_spectrum(in, path);
}

void write_spectrum(const std::string& path, const Spectrum& spectrum) {
    auto out = open_output(path);
    out << "# energy degeneracy\n";
    for (Eigen::Index k = 0; k < spectrum.size(); ++k) {
        out << format_number(spectrum.energy(k)) << ' ' << format_number(spectrum.degeneracy(k)) << '\n';
    }
}

// POVM -------------------------------------------------------------------------

Povm parse_povm(std::istream& in, const std::string& source) {
    Eigen::Index outcomes = 0;
    Eigen::Index levels = 0;
    Matrix<double> filters;
    Eigen::Index row = 0;
    int header_line = 0;
    int number = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++number;
        const std::string line = strip_comment(raw);
        if (line.empty()) continue;
        const auto tokens = split_ws(line);
        if (header_line == 0) {
            long long n = 0;
            long long k = 0;
            const bool ok = tokens.size() == 4 && tokens[0] == "outcomes" && tokens[2] == "levels" &&
                            std::from_chars(tokens[1].data(), tokens[1].data() + tokens[1].size(), n).ec ==
                                std::errc() &&
                            std::from_chars(tokens[3].data(), tokens[3].data() + tokens[3].size(), k).ec ==
                                std::errc();
            if (!ok || n < 1 || k < 1) throw ConfigError(source, number, "expected header `outcomes N levels K`");
            outcomes = n;
            levels = k;
            filters.resize(outcomes, levels);
            header_line = number;
            continue;
        }
        if (row >= levels) throw ConfigError(source, number, "more than " + std::to_string(levels) + " level rows");
        if (static_cast<Eigen::Index>(tokens.size()) != outcomes) {
            throw ConfigError(source, number,
                              "expected " + std::to_string(outcomes) + " filter values, got " +
                                  std::to_string(tokens.size()));
        }
        double total = 0.0;
        for (Eigen::Index m = 0; m < outcomes; ++m) {
            const auto v = parse_double(tokens[static_cast<std::size_t>(m)]);
            if (!v || !(*v >= 0.0 && *v <= 1.0)) {
                throw ConfigError(source, number, "filter value '" + tokens[static_cast<std::size_t>(m)] +
                                                      "' outside [0, 1]");
            }
            filters(m, row) = *v;
            total += *v;
        }
        if (std::abs(total - 1.0) > 1e-10) {
            throw ConfigError(source, number, "filters sum to " + format_number(total) + ", not 1 (completeness)");
        }
        ++row;
    }
    if (header_line == 0) throw ConfigError(source, 0, "missing header `outcomes N levels K`");
    if (row != levels) {
        throw ConfigError(source, number,
                          "expected " + std::to_string(levels) + " level rows, got " + std::to_string(row));
    }
    try {
        return Povm(filters);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(source, header_line, e.what());
    }
}

Povm read_povm(const std::string& path) {
    auto in = open_input(path);
    return parse_povm(in, path);
}

void write_povm(const std::string& path, const Povm& povm) {
    auto out = open_output(path);
    out << "outcomes " << povm.outcome_count() << " levels " << povm.level_count() << '\n';
    for (Eigen::Index k = 0; k < povm.level_count(); ++k) {
        for (Eigen::Index m = 0; m < povm.outcome_count(); ++m) {
            out << (m ? " " : "") << format_number(povm.filter(m, k));
        }
        out << '\n';
    }
}

// INI ----------------------------------------------------------------------------

IniDocument IniDocument::parse(std::istream& in, const std::string& source) {
    IniDocument doc;
    doc.source_ = source;
    std::string current;
    int number = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++number;
        const std::string line = strip_comment(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(source, number, "unterminated section header");
            current = trim(line.substr(1, line.size() - 2));
            if (current.empty()) throw ConfigError(source, number, "empty section name");
            if (doc.section_lines_.count(current)) {
                throw ConfigError(source, number, "duplicate section [" + current + "]");
            }
            doc.section_lines_[current] = number;
            doc.sections_[current];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(source, number, "expected `key = value`");
        if (current.empty()) throw ConfigError(source, number, "key outside of any section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(source, number, "empty key");
        auto& section = doc.sections_[current];
        if (section.count(key)) throw ConfigError(source, number, "duplicate key '" + key + "'");
        section[key] = IniValue{value, number};
    }
    return doc;
}

IniDocument IniDocument::read(const std::string& path) {
    auto in = open_input(path);
    return parse(in, path);
}

const IniDocument::Section* IniDocument::section(const std::string& name) const {
    const auto it = sections_.find(name);
    return it == sections_.end() ? nullptr : &it->second;
}

const IniValue* IniDocument::find(const std::string& section_name, const std::string& key) const {
    const auto* s = section(section_name);
    if (!s) return nullptr;
    const auto it = s->find(key);
    return it == s->end() ? nullptr : &it->second;
}

bool IniDocument::has(const std::string& section_name, const std::string& key) const {
    return find(section_name, key) != nullptr;
}

int IniDocument::section_line(const std::string& name) const {
    const auto it = section_lines_.find(name);
    return it == section_lines_.end() ? 0 : it->second;
}

std::vector<std::string> IniDocument::section_names() const {
    std::vector<std::string> names;
    for (const auto& [name, _] : sections_) names.push_back(name);
    return names;
}

int IniDocument::line_of(const std::string& section_name, const std::string& key) const {
    if (const auto* v = find(section_name, key)) return v->line;
    return section_line(section_name);
}

void IniDocument::fail(const std::string& section_name, const std::string& key, const std::string& message) const {
    throw ConfigError(source_, line_of(section_name, key), "[" + section_name + "] " + key + ": " + message);
}

std::string IniDocument::string(const std::string& section_name, const std::string& key) const {
    const auto* v = find(section_name, key);
    if (!v) fail(section_name, key, "missing required parameter");
    if (v->text.empty()) fail(section_name, key, "empty value");
    return v->text;
}

std::string IniDocument::string_or(const std::string& section_name, const std::string& key,
                                   const std::string& fallback) const {
    return has(section_name, key) ? string(section_name, key) : fallback;
}

double IniDocument::number(const std::string& section_name, const std::string& key) const {
    const std::string text = string(section_name, key);
    const auto v = parse_double(text);
    if (!v || !std::isfinite(*v)) fail(section_name, key, "expected a finite number, got '" + text + "'");
    return *v;
}

double IniDocument::number_or(const std::string& section_name, const std::string& key, double fallback) const {
    return has(section_name, key) ? number(section_name, key) : fallback;
}

long long IniDocument::integer(const std::string& section_name, const std::string& key) const {
    const std::string text = string(section_name, key);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        fail(section_name, key, "expected an integer, got '" + text + "'");
    }
    return value;
}

long long IniDocument::integer_or(const std::string& section_name, const std::string& key, long long fallback) const {
    return has(section_name, key) ? integer(section_name, key) : fallback;
}

bool IniDocument::boolean_or(const std::string& section_name, const std::string& key, bool fallback) const {
    if (!has(section_name, key)) return fallback;
    const std::string text = string(section_name, key);
    if (text == "true" || text == "yes" || text == "1") return true;
    if (text == "false" || text == "no" || text == "0") return false;
    fail(section_name, key, "expected true or false, got '" + text + "'");
}

// CSV ------------------------------------------------------------------------------

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, x, std::chars_format::general, 17);
    if (ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
    return std::string(buffer, ptr);
}

std::string content_hash(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(h));
    return buffer;
}

void write_csv(const std::string& path, const std::vector<std::pair<std::string, std::string>>& metadata,
               const std::vector<std::string>& header, const std::vector<CsvRow>& rows) {
    std::ostringstream out;
    for (const auto& [key, value] : metadata) out << "# " << key << ": " << value << '\n';
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size()) throw std::invalid_argument("write_csv: row width differs from header");
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
        out << '\n';
    }
    auto file = open_output(path);
    file << out.str();
    if (!file) throw std::runtime_error("write failed for " + path);
}

CsvRow numeric_row(std::initializer_list<double> values) {
    CsvRow row;
    row.reserve(values.size());
    for (double v : values) row.push_back(format_number(v));
    return row;
}

}  // namespace thermo
