#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace mtsk {

// Shortest round-trip decimal form; output is a pure function of the value,
// which keeps rerun artifacts byte-identical.
std::string format_double(double v);

std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_quote(const std::string& field);

// Matrix export: optional header + optional leading id column.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& col_names = {},
                      const std::vector<std::string>& row_ids = {},
                      const std::string& id_col = "id");
Eigen::MatrixXd read_matrix_csv(const std::string& path, bool has_header,
                                std::vector<std::string>* row_ids = nullptr);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Little-endian binary stream for model files.
class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path);
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void str(const std::string& s);
    void doubles(const double* p, std::size_t n);
    void close();

private:
    std::ofstream out_;
    std::string path_;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::string& path);
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::string str();
    void doubles(double* p, std::size_t n);

private:
    std::ifstream in_;
    std::string path_;
    void need(std::size_t n, char* dst);
};

}  // namespace mtsk
