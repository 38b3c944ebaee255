#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace movctl {

using json = nlohmann::ordered_json;

class CsvWriter {
public:
    CsvWriter(const std::string& path, std::vector<std::string> header);
    void row(const std::vector<std::string>& fields);

private:
    std::ofstream out_;
    std::size_t width_;
};

void write_json(const std::string& path, const json& j);

// Creates the directory (and parents) if missing; returns path joined with name.
std::string join_path(const std::string& dir, const std::string& name);
void ensure_directory(const std::string& dir);

std::uint64_t fnv1a(std::string_view bytes);

std::string num(double v);  // shortest round-trip text

}  // namespace movctl
