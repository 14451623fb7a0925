#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edlb/geometry.hpp"

namespace edlb {

/// Interleaved 8-bit RGB, row-major from the top.
struct Image8 {
    int width = 0, height = 0;
    std::vector<std::uint8_t> rgb;
};

/// Single-channel float map, row-major from the top (file order is bottom-up).
struct FloatMap {
    int width = 0, height = 0;
    std::vector<float> data;
};

// Binary PPM (P6), max value 255.
std::string encode_ppm(const Image8& img);
Image8 decode_ppm(const std::string& bytes);
void write_ppm(const std::filesystem::path& path, const Image8& img);
Image8 read_ppm(const std::filesystem::path& path);

// PFM greyscale ("Pf"), written little-endian (negative scale) with bottom-up scanlines.
std::string encode_pfm(const FloatMap& map);
FloatMap decode_pfm(const std::string& bytes);
void write_pfm(const std::filesystem::path& path, const FloatMap& map);
FloatMap read_pfm(const std::filesystem::path& path);

/// One TUM trajectory line: timestamp tx ty tz qx qy qz qw (camera-to-world).
struct StampedPose {
    double timestamp = 0;
    PoseSE3 pose;
};

std::string encode_tum(const std::vector<StampedPose>& traj);
std::vector<StampedPose> decode_tum(const std::string& text);
void write_tum(const std::filesystem::path& path, const std::vector<StampedPose>& traj);
std::vector<StampedPose> read_tum(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace edlb
