#pragma once

#include <filesystem>
#include <iosfwd>

#include "noir/memory.hpp"
#include "noir/param.hpp"
#include "noir/signal.hpp"

// Little-endian binary containers: EPC1 epochs, FMX1 feature matrices and
// FMAP feature maps. Strings are u32 byte length followed by UTF-8 bytes.
namespace noir::io {

void write_epoch(std::ostream& out, const signal::Epoch& epoch);
signal::Epoch read_epoch(std::istream& in);
void save_epoch(const std::filesystem::path& path, const signal::Epoch& epoch);
signal::Epoch load_epoch(const std::filesystem::path& path);

void write_feature_matrix(std::ostream& out, const memory::FeatureMatrix& m);
memory::FeatureMatrix read_feature_matrix(std::istream& in);
void save_feature_matrix(const std::filesystem::path& path, const memory::FeatureMatrix& m);
memory::FeatureMatrix load_feature_matrix(const std::filesystem::path& path);

void write_feature_map(std::ostream& out, const param::FeatureMap& m);
param::FeatureMap read_feature_map(std::istream& in);
void save_feature_map(const std::filesystem::path& path, const param::FeatureMap& m);
param::FeatureMap load_feature_map(const std::filesystem::path& path);

// Masks travel as single-channel FMAP files at pixel resolution.
param::FeatureMap mask_to_map(const param::Mask& mask);
param::Mask map_to_mask(const param::FeatureMap& map);

}  // namespace noir::io
