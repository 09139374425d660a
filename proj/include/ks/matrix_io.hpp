#ifndef KS_MATRIX_IO_HPP
#define KS_MATRIX_IO_HPP

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "ks/assembly.hpp"
#include "ks/errors.hpp"
#include "ks/hash.hpp"

namespace ks {

// Advisory lock file guarding a shared cache entry; held for the duration of
// a read or write.
class CacheLock {
public:
    explicit CacheLock(const std::string& target) : path_(target + ".lock") {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
            if (fd_ >= 0) return;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        fail(errc::io_error, "could not acquire cache lock " + path_);
    }

    ~CacheLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(path_.c_str());
        }
    }

    CacheLock(const CacheLock&) = delete;
    CacheLock& operator=(const CacheLock&) = delete;

private:
    std::string path_;
    int fd_ = -1;
};

// Matrix Market coordinate text, symmetric real, lower triangle, with header
// comment lines carrying the assembly fingerprint and a checksum of the data
// section.
inline void save_matrix_cache(const std::string& path, const StiffnessMatrix& S) {
    const Eigen::Index M = S.A.rows();
    std::string data;
    data.reserve(static_cast<std::size_t>(M) * (M + 1) / 2 * 28);
    char buf[96];
    long nnz = 0;
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", static_cast<long>(i + 1),
                          static_cast<long>(j + 1), S.A(i, j));
            data += buf;
            ++nnz;
        }
    const CacheLock lock(path);
    std::ofstream out(path);
    require(out.good(), errc::io_error, "cannot write matrix cache " + path);
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    out << "%ks-fingerprint " << S.fingerprint << "\n";
    out << "%ks-checksum " << fingerprint_of(data) << "\n";
    out << M << " " << M << " " << nnz << "\n";
    out << data;
    require(out.good(), errc::io_error, "write failed for matrix cache " + path);
}

// A cache hit requires fingerprint equality; a checksum mismatch means the
// file is corrupt. Grid/config/kernel metadata come from the caller, who
// derived the expected fingerprint from them.
inline StiffnessMatrix load_matrix_cache(const std::string& path, const std::string& expected_fingerprint,
                                         const GridPtr& grid, const AssemblyConfig& cfg,
                                         const std::string& kernel_description) {
    const CacheLock lock(path);
    std::ifstream in(path);
    require(in.good(), errc::io_error, "cannot read matrix cache " + path);
    std::string line;
    require(std::getline(in, line) && line.rfind("%%MatrixMarket", 0) == 0, errc::io_error,
            "not a Matrix Market file: " + path);
    std::string fingerprint, checksum;
    while (in.peek() == '%') {
        std::getline(in, line);
        std::istringstream ls(line);
        std::string tag, value;
        ls >> tag >> value;
        if (tag == "%ks-fingerprint") fingerprint = value;
        if (tag == "%ks-checksum") checksum = value;
    }
    require(fingerprint == expected_fingerprint, errc::cache_fingerprint_mismatch,
            "cached matrix was built from a different grid/kernel/config");

    long rows = 0, cols = 0, nnz = 0;
    require(static_cast<bool>(in >> rows >> cols >> nnz), errc::io_error, "bad size line in " + path);
    std::getline(in, line);
    std::string data;
    std::stringstream rest;
    rest << in.rdbuf();
    data = rest.str();
    require(fingerprint_of(data) == checksum, errc::io_error,
            "matrix cache checksum mismatch (corrupted): " + path);

    require(rows == cols && static_cast<std::size_t>(rows) == grid->node_count(), errc::io_error,
            "cached matrix size does not match the grid");
    StiffnessMatrix S;
    S.grid = grid;
    S.cfg = cfg;
    S.kernel_description = kernel_description;
    S.fingerprint = expected_fingerprint;
    S.A = Eigen::MatrixXd::Zero(rows, cols);
    std::istringstream ds(data);
    for (long k = 0; k < nnz; ++k) {
        long i = 0, j = 0;
        double v = 0.0;
        require(static_cast<bool>(ds >> i >> j >> v), errc::io_error, "truncated matrix cache " + path);
        S.A(i - 1, j - 1) = v;
        S.A(j - 1, i - 1) = v;
    }
    return S;
}

} // namespace ks

#endif
