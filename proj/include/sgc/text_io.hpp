// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "sgc/error.hpp"
#include "sgc/tensor.hpp"

// Plain-text tensors:
//
//   dense-vector <d>
//   v0 v1 ... v(d-1)
//
//   dense-matrix <rows> <cols>
//   row-major values, any whitespace
//
// Values are decimal; writers emit the shortest string that round-trips.

namespace sgc {

/// Shortest round-trip decimal representation.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view token) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (!token.empty() && *first == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    require(res.ec == std::errc() && res.ptr == last, ErrorKind::Parse,
            "not a number: '" + std::string(token) + "'");
    return value;
}

inline std::size_t parse_count(std::string_view token) {
    std::size_t value = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    require(res.ec == std::errc() && res.ptr == token.data() + token.size(), ErrorKind::Parse,
            "not a non-negative integer: '" + std::string(token) + "'");
    return value;
}

namespace detail {

inline std::string next_token(std::istream& in, const char* what) {
    std::string token;
    require(static_cast<bool>(in >> token), ErrorKind::Parse,
            std::string("unexpected end of input while reading ") + what);
    return token;
}

inline void read_values(std::istream& in, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = parse_double(next_token(in, "values"));
    std::string extra;
    require(!(in >> extra), ErrorKind::Parse, "trailing data after " + std::to_string(n) + " values");
}

} // namespace detail

inline DenseVector read_dense_vector(std::istream& in) {
    const std::string tag = detail::next_token(in, "header");
    require(tag == "dense-vector", ErrorKind::Parse, "expected 'dense-vector' header, got '" + tag + "'");
    const std::size_t d = parse_count(detail::next_token(in, "length"));
    require(d >= 1, ErrorKind::InvalidDimension, "dense-vector length must be >= 1");
    DenseVector v(d);
    detail::read_values(in, v.data(), d);
    return v;
}

inline DenseMatrix read_dense_matrix(std::istream& in) {
    const std::string tag = detail::next_token(in, "header");
    require(tag == "dense-matrix", ErrorKind::Parse, "expected 'dense-matrix' header, got '" + tag + "'");
    const std::size_t rows = parse_count(detail::next_token(in, "rows"));
    const std::size_t cols = parse_count(detail::next_token(in, "cols"));
    require(rows >= 1 && cols >= 1, ErrorKind::InvalidDimension, "dense-matrix dims must be >= 1");
    DenseMatrix m(rows, cols);
    detail::read_values(in, m.data(), m.size());
    return m;
}

inline void write_dense_vector(std::ostream& out, const DenseVector& v) {
    out << "dense-vector " << v.size() << '\n';
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << format_double(v[i]);
    out << '\n';
}

inline void write_dense_matrix(std::ostream& out, const DenseMatrix& m) {
    out << "dense-matrix " << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_double(m(r, c));
        out << '\n';
    }
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot open '" + path + "' for reading");
    return in;
}

inline DenseVector load_dense_vector(const std::string& path) {
    auto in = open_input(path);
    return read_dense_vector(in);
}

inline DenseMatrix load_dense_matrix(const std::string& path) {
    auto in = open_input(path);
    return read_dense_matrix(in);
}

} // namespace sgc
