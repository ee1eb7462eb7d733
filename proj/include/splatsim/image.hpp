#pragma once

#include <string>
#include <vector>

namespace splatsim {

// Row-major RGB float image, [0,1] nominal range.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> rgb; // 3 * width * height

    float* pixel(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
    const float* pixel(int x, int y) const {
        return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
};

Image make_image(int width, int height);

// Byte conversion used by both writers: round(255 * clamp(c, 0, 1)).
unsigned char float_to_byte(float c);

// Binary P6, maxval 255. Bit-exact for identical float input.
void write_ppm(const Image& img, const std::string& path);
Image read_ppm(const std::string& path);

// 8-bit RGB PNG (zlib-compressed) for inspection.
void write_png(const Image& img, const std::string& path);

} // namespace splatsim
