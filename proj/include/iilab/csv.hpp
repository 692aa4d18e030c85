#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace iilab {

// Writes rows to <path>.partial and renames to <path> on finish(), so a
// crashed run never leaves a complete-looking file behind.
class CsvWriter {
public:
    CsvWriter(std::filesystem::path path, const std::vector<std::string>& header);
    ~CsvWriter();

    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<std::string>& fields);
    void finish();

private:
    std::filesystem::path final_path_;
    std::filesystem::path partial_path_;
    std::ofstream out_;
    size_t n_fields_;
    bool finished_ = false;
};

// Fixed 6-decimal formatting for metric values, so output is byte-stable.
std::string fmt_fixed(double v);

// Compact formatting for integers and config-like values.
std::string fmt_int(long long v);

}  // namespace iilab
