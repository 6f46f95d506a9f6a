//! File formats: numeric CSV, IDX image/label containers, model files and
//! image resampling for fixtures.

pub mod csv;
pub mod idx;
pub mod model_file;
pub mod resize;

pub use self::csv::{load_csv, read_csv, save_csv, write_csv, CsvLayout};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, write_idx_images, write_idx_labels, IdxImages};
pub use model_file::{load_model, read_model, save_model, save_references, write_model, ModelRefs};
pub use resize::{resize_area, resize_columns};
