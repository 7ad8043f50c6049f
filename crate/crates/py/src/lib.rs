use pyo3::prelude::*;

#[pymodule]
fn ntl_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
