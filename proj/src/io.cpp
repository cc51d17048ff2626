#include "mtsk/io.hpp"

#include <charconv>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace mtsk {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out += '"';
    return out;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& col_names,
                      const std::vector<std::string>& row_ids,
                      const std::string& id_col) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    if (!col_names.empty()) {
        if (!row_ids.empty()) out << id_col << ',';
        for (std::size_t j = 0; j < col_names.size(); ++j) {
            if (j) out << ',';
            out << col_names[j];
        }
        out << '\n';
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (!row_ids.empty()) out << row_ids[static_cast<std::size_t>(i)] << ',';
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

Eigen::MatrixXd read_matrix_csv(const std::string& path, bool has_header,
                                std::vector<std::string>* row_ids) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    std::vector<std::vector<double>> rows;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first && has_header) {
            first = false;
            continue;
        }
        first = false;
        auto cells = split_csv_line(line);
        std::size_t start = 0;
        if (row_ids) {
            row_ids->push_back(cells[0]);
            start = 1;
        }
        std::vector<double> row;
        row.reserve(cells.size() - start);
        for (std::size_t j = start; j < cells.size(); ++j) row.push_back(std::stod(cells[j]));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return {};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size())
            throw std::runtime_error("ragged csv: " + path);
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
}

BinaryWriter::BinaryWriter(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
}

void BinaryWriter::u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }

void BinaryWriter::u32(std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(b, 4);
}

void BinaryWriter::u64(std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(b, 8);
}

void BinaryWriter::f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
}

void BinaryWriter::str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryWriter::doubles(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) f64(p[i]);
}

void BinaryWriter::close() {
    out_.close();
    if (!out_) throw std::runtime_error("write failed: " + path_);
}

BinaryReader::BinaryReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw std::runtime_error("cannot open: " + path);
}

void BinaryReader::need(std::size_t n, char* dst) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
        throw std::runtime_error("truncated file: " + path_);
}

std::uint8_t BinaryReader::u8() {
    char c;
    need(1, &c);
    return static_cast<std::uint8_t>(c);
}

std::uint32_t BinaryReader::u32() {
    char b[4];
    need(4, b);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

std::uint64_t BinaryReader::u64() {
    char b[8];
    need(8, b);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

double BinaryReader::f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string BinaryReader::str() {
    std::uint64_t n = u64();
    std::string s(n, '\0');
    if (n) need(n, s.data());
    return s;
}

void BinaryReader::doubles(double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] = f64();
}

}  // namespace mtsk
