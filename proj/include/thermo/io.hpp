// io.hpp: text formats for spectra, POVMs, scenario configs and CSV results.

#pragma once

#include "thermo/povm.hpp"
#include "thermo/spectra.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace thermo {

inline constexpr const char* kVersion = "0.1.0";

// Invalid input file. what() is "source:line: message" when the line is known.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& source, int line, const std::string& message);
    const std::string& source() const { return source_; }
    int line() const { return line_; }
    const std::string& message() const { return message_; }

private:
    std::string source_;
    int line_;
    std::string message_;
};

// `energy degeneracy` per line, '#' comments, first energy 0, ascending.
Spectrum parse_spectrum(std::istream& in, const std::string& source);
Spectrum read_spectrum(const std::string& path);
void write_spectrum(const std::string& path, const Spectrum& spectrum);

// Header `outcomes N levels K`, then K lines of N filter values (one line per level).
Povm parse_povm(std::istream& in, const std::string& source);
Povm read_povm(const std::string& path);
void write_povm(const std::string& path, const Povm& povm);

struct IniValue {
    std::string text;
    int line = 0;
};

class IniDocument {
public:
    using Section = std::map<std::string, IniValue>;

    static IniDocument parse(std::istream& in, const std::string& source);
    static IniDocument read(const std::string& path);

    const std::string& source() const { return source_; }
    bool has(const std::string& section, const std::string& key) const;
    const IniValue* find(const std::string& section, const std::string& key) const;
    const Section* section(const std::string& name) const;
    int section_line(const std::string& name) const;
    std::vector<std::string> section_names() const;

    // Typed access; failures raise ConfigError anchored at the offending line.
    std::string string(const std::string& section, const std::string& key) const;
    std::string string_or(const std::string& section, const std::string& key, const std::string& fallback) const;
    double number(const std::string& section, const std::string& key) const;
    double number_or(const std::string& section, const std::string& key, double fallback) const;
    long long integer(const std::string& section, const std::string& key) const;
    long long integer_or(const std::string& section, const std::string& key, long long fallback) const;
    bool boolean_or(const std::string& section, const std::string& key, bool fallback) const;

    // Line of the key, else of its section header, else 0.
    int line_of(const std::string& section, const std::string& key) const;
    [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& message) const;

private:
    std::string source_;
    std::map<std::string, Section> sections_;
    std::map<std::string, int> section_lines_;
};

// 17 significant digits, '.' decimal separator, independent of the global locale.
std::string format_number(double x);

// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string content_hash(const std::string& bytes);

using CsvRow = std::vector<std::string>;

// '#'-prefixed `key: value` metadata, then a header row and data rows.
void write_csv(const std::string& path, const std::vector<std::pair<std::string, std::string>>& metadata,
               const std::vector<std::string>& header, const std::vector<CsvRow>& rows);

CsvRow numeric_row(std::initializer_list<double> values);

}  // namespace thermo
