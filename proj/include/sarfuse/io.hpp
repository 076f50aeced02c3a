#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sarfuse/cloudsim.hpp"
#include "sarfuse/core.hpp"
#include "sarfuse/detect.hpp"

namespace sarfuse::io {

/// Dataset rows: pixel_id,parcel_id,region_id,step,doy,ndvi,sig_vv_db,sig_vh_db,coh_vv,coh_vh
/// sorted by (pixel_id, step); an empty ndvi field is an absent value. Derived
/// channels are recomputed on read.
void write_dataset(const Dataset& dataset, std::ostream& out);
void write_dataset(const Dataset& dataset, const std::string& path);
/// Labels are attached separately; the grid is recovered from (step, doy).
Dataset read_dataset(std::istream& in, const std::string& source = "dataset");
Dataset read_dataset(const std::string& path);

/// parcel_id,event_doy with one row per event; unmown parcels carry one row
/// with an empty event_doy.
void write_labels(const std::vector<ParcelLabel>& labels, const std::string& path);
std::vector<ParcelLabel> read_labels(const std::string& path);

/// mask_id,region_id,bit_0..bit_{T-1}; pools keep first-appearance order.
void write_masks(const std::vector<cloudsim::MaskPool>& pools, const std::string& path);
std::vector<cloudsim::MaskPool> read_masks(const std::string& path);

/// parcel_id,event_doy,score
using EventTable = std::map<std::string, detect::EventSet>;
void write_events(const EventTable& events, const std::string& path);
EventTable read_events(const std::string& path);

/// Writes through `path.tmp` and renames; the temporary is removed on failure.
void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& writer);

/// Lowercase hex SHA-256 of a file's bytes.
std::string file_sha256(const std::string& path);
std::string sha256_hex(const std::string& bytes);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace sarfuse::io
