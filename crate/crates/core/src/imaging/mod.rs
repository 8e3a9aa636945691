//! Image and mask representation, grayscale conversion, mask generation and
//! file IO.

mod io;
mod mask;
mod tensor;

pub use io::{
    load_image, load_manifest, read_csv_rows, read_json, resize_bilinear, write_csv_rows,
    write_json,
};
pub use mask::{irregular_mask, regular_mask, MaskGrid, MaskMode};
pub use tensor::{to_grayscale, GrayPlane, ImageTensor};
