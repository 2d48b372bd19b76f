#pragma once

#include <string>

#include "tgssl/types.hpp"

namespace tgssl {

/// Round a double to 9 significant decimal digits (the canonical on-disk
/// precision). save_video applies this to every float, so a load/save cycle
/// is byte-stable after the first save.
double quantize9(double x);

/// Canonical JSONL serialization: line 1 is the header object
/// {"labeled": ..., "video_id": ...}, each following line one frame object.
std::string video_to_jsonl(const Video& v);

/// Parses and validates. Throws std::runtime_error naming the offending
/// 1-based line on parse or schema errors.
Video load_video(const std::string& path);
Video parse_video_jsonl(const std::string& text, const std::string& origin);

void save_video(const Video& v, const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace tgssl
