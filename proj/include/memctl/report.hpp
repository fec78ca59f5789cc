#pragma once

// Artifact writers. CSV floats use 17 significant digits and LF line endings so
// that reruns are byte-identical.

#include "memctl/errors.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace memctl {

/// Output directory or file cannot be written.
class OutputError : public InputError {
public:
    using InputError::InputError;
};

std::string format_double(double value);

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns);

    void add_row(const std::vector<double>& values);
    void add_row(std::vector<std::string> cells);

    std::size_t rows() const { return rows_.size(); }
    const std::vector<std::string>& columns() const { return columns_; }
    std::string str() const;

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

/// Creates the directory if needed and checks that it accepts files.
void prepare_output_dir(const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, const std::string& content);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& doc);

/// NaN and infinities become null so the document stays valid JSON.
nlohmann::ordered_json json_number(double value);

}  // namespace memctl
