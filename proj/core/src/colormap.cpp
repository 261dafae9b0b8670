#include "tsgan/image_io.hpp"

namespace tsgan::imageops {

// Red-yellow ramp: dark red (128,0,0) -> red (255,0,0) at 0.5 -> yellow (255,255,0).
const std::array<std::array<std::uint8_t, 3>, 256>& heatmap_colormap() {
    static constexpr std::array<std::array<std::uint8_t, 3>, 256> table{{
    {128, 0, 0}, {129, 0, 0}, {130, 0, 0}, {131, 0, 0}, {132, 0, 0}, {133, 0, 0},
    {134, 0, 0}, {135, 0, 0}, {136, 0, 0}, {137, 0, 0}, {138, 0, 0}, {139, 0, 0},
    {140, 0, 0}, {141, 0, 0}, {142, 0, 0}, {143, 0, 0}, {144, 0, 0}, {145, 0, 0},
    {146, 0, 0}, {147, 0, 0}, {148, 0, 0}, {149, 0, 0}, {150, 0, 0}, {151, 0, 0},
    {152, 0, 0}, {153, 0, 0}, {154, 0, 0}, {155, 0, 0}, {156, 0, 0}, {157, 0, 0},
    {158, 0, 0}, {159, 0, 0}, {160, 0, 0}, {161, 0, 0}, {162, 0, 0}, {163, 0, 0},
    {164, 0, 0}, {165, 0, 0}, {166, 0, 0}, {167, 0, 0}, {168, 0, 0}, {169, 0, 0},
    {170, 0, 0}, {171, 0, 0}, {172, 0, 0}, {173, 0, 0}, {174, 0, 0}, {175, 0, 0},
    {176, 0, 0}, {177, 0, 0}, {178, 0, 0}, {179, 0, 0}, {180, 0, 0}, {181, 0, 0},
    {182, 0, 0}, {183, 0, 0}, {184, 0, 0}, {185, 0, 0}, {186, 0, 0}, {187, 0, 0},
    {188, 0, 0}, {189, 0, 0}, {190, 0, 0}, {191, 0, 0}, {192, 0, 0}, {193, 0, 0},
    {194, 0, 0}, {195, 0, 0}, {196, 0, 0}, {197, 0, 0}, {198, 0, 0}, {199, 0, 0},
    {200, 0, 0}, {201, 0, 0}, {202, 0, 0}, {203, 0, 0}, {204, 0, 0}, {205, 0, 0},
    {206, 0, 0}, {207, 0, 0}, {208, 0, 0}, {209, 0, 0}, {210, 0, 0}, {211, 0, 0},
    {212, 0, 0}, {213, 0, 0}, {214, 0, 0}, {215, 0, 0}, {216, 0, 0}, {217, 0, 0},
    {218, 0, 0}, {219, 0, 0}, {220, 0, 0}, {221, 0, 0}, {222, 0, 0}, {223, 0, 0},
    {224, 0, 0}, {225, 0, 0}, {226, 0, 0}, {227, 0, 0}, {228, 0, 0}, {229, 0, 0},
    {230, 0, 0}, {231, 0, 0}, {232, 0, 0}, {233, 0, 0}, {234, 0, 0}, {235, 0, 0},
    {236, 0, 0}, {237, 0, 0}, {238, 0, 0}, {239, 0, 0}, {240, 0, 0}, {241, 0, 0},
    {242, 0, 0}, {243, 0, 0}, {244, 0, 0}, {245, 0, 0}, {246, 0, 0}, {247, 0, 0},
    {248, 0, 0}, {249, 0, 0}, {250, 0, 0}, {251, 0, 0}, {252, 0, 0}, {253, 0, 0},
    {254, 0, 0}, {255, 0, 0}, {255, 1, 0}, {255, 3, 0}, {255, 5, 0}, {255, 7, 0},
    {255, 9, 0}, {255, 11, 0}, {255, 13, 0}, {255, 15, 0}, {255, 17, 0}, {255, 19, 0},
    {255, 21, 0}, {255, 23, 0}, {255, 25, 0}, {255, 27, 0}, {255, 29, 0}, {255, 31, 0},
    {255, 33, 0}, {255, 35, 0}, {255, 37, 0}, {255, 39, 0}, {255, 41, 0}, {255, 43, 0},
    {255, 45, 0}, {255, 47, 0}, {255, 49, 0}, {255, 51, 0}, {255, 53, 0}, {255, 55, 0},
    {255, 57, 0}, {255, 59, 0}, {255, 61, 0}, {255, 63, 0}, {255, 65, 0}, {255, 67, 0},
    {255, 69, 0}, {255, 71, 0}, {255, 73, 0}, {255, 75, 0}, {255, 77, 0}, {255, 79, 0},
    {255, 81, 0}, {255, 83, 0}, {255, 85, 0}, {255, 87, 0}, {255, 89, 0}, {255, 91, 0},
    {255, 93, 0}, {255, 95, 0}, {255, 97, 0}, {255, 99, 0}, {255, 101, 0}, {255, 103, 0},
    {255, 105, 0}, {255, 107, 0}, {255, 109, 0}, {255, 111, 0}, {255, 113, 0}, {255, 115, 0},
    {255, 117, 0}, {255, 119, 0}, {255, 121, 0}, {255, 123, 0}, {255, 125, 0}, {255, 127, 0},
    {255, 129, 0}, {255, 131, 0}, {255, 133, 0}, {255, 135, 0}, {255, 137, 0}, {255, 139, 0},
    {255, 141, 0}, {255, 143, 0}, {255, 145, 0}, {255, 147, 0}, {255, 149, 0}, {255, 151, 0},
    {255, 153, 0}, {255, 155, 0}, {255, 157, 0}, {255, 159, 0}, {255, 161, 0}, {255, 163, 0},
    {255, 165, 0}, {255, 167, 0}, {255, 169, 0}, {255, 171, 0}, {255, 173, 0}, {255, 175, 0},
    {255, 177, 0}, {255, 179, 0}, {255, 181, 0}, {255, 183, 0}, {255, 185, 0}, {255, 187, 0},
    {255, 189, 0}, {255, 191, 0}, {255, 193, 0}, {255, 195, 0}, {255, 197, 0}, {255, 199, 0},
    {255, 201, 0}, {255, 203, 0}, {255, 205, 0}, {255, 207, 0}, {255, 209, 0}, {255, 211, 0},
    {255, 213, 0}, {255, 215, 0}, {255, 217, 0}, {255, 219, 0}, {255, 221, 0}, {255, 223, 0},
    {255, 225, 0}, {255, 227, 0}, {255, 229, 0}, {255, 231, 0}, {255, 233, 0}, {255, 235, 0},
    {255, 237, 0}, {255, 239, 0}, {255, 241, 0}, {255, 243, 0}, {255, 245, 0}, {255, 247, 0},
    {255, 249, 0}, {255, 251, 0}, {255, 253, 0}, {255, 255, 0},
    }};
    return table;
}

}  // namespace tsgan::imageops
