#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = tapersim::io::parse_pgm(data, 0.5);
    let _ = tapersim::io::decode_intensity_image(data, 0.5);
});
