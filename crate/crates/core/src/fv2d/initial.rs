use super::grid::{CellField, Grid2D};

/// Slotted cylinder, cone and cosine lump on `[0,1]²`.
pub fn leveque_value(x: f64, y: f64) -> f64 {
    let r_zal = ((x - 0.5).powi(2) + (y - 0.75).powi(2)).sqrt();
    if r_zal <= 0.15 && (x <= 0.475 || x > 0.525 || y >= 0.85) {
        return 1.0;
    }
    let r_cone = ((x - 0.5).powi(2) + (y - 0.25).powi(2)).sqrt();
    if r_cone <= 0.15 {
        return 1.0 - r_cone / 0.15;
    }
    let r_cos = ((x - 0.25).powi(2) + (y - 0.5).powi(2)).sqrt();
    if r_cos <= 0.15 {
        return 0.5 * (1.0 + (std::f64::consts::PI * r_cos / 0.15).cos());
    }
    0.0
}

pub fn leveque_initial(g: &Grid2D) -> CellField {
    CellField::from_fn(*g, leveque_value)
}

/// Indicator of `[0.1, 0.6]²`.
pub fn square_value(x: f64, y: f64) -> f64 {
    let inside = |t: f64| (0.1..=0.6).contains(&t);
    if inside(x) && inside(y) {
        1.0
    } else {
        0.0
    }
}

pub fn square_initial(g: &Grid2D) -> CellField {
    CellField::from_fn(*g, square_value)
}
