#include "cryosim/digest.hpp"

#include <fstream>

#include <openssl/evp.h>

#include "cryosim/error.hpp"

namespace cryosim {

namespace {

std::string to_hex(const unsigned char* digest, unsigned len) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

} // namespace

std::string sha256_hex(const std::uint8_t* data, std::size_t len) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned digest_len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data, len) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &digest_len) != 1) {
        if (ctx) EVP_MD_CTX_free(ctx);
        fail_internal("SHA-256 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    return to_hex(digest, digest_len);
}

std::string sha256_hex(const std::string& data) {
    return sha256_hex(reinterpret_cast<const std::uint8_t*>(data.data()), data.size());
}

std::string sha256_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_data("cannot open file for digest: " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        if (ctx) EVP_MD_CTX_free(ctx);
        fail_internal("SHA-256 digest failed");
    }
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof buf);
        std::streamsize n = f.gcount();
        if (n > 0 && EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(n)) != 1) {
            EVP_MD_CTX_free(ctx);
            fail_internal("SHA-256 digest failed");
        }
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned digest_len = 0;
    if (EVP_DigestFinal_ex(ctx, digest, &digest_len) != 1) {
        EVP_MD_CTX_free(ctx);
        fail_internal("SHA-256 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    return to_hex(digest, digest_len);
}

} // namespace cryosim
