use nalgebra::DVector;

/// Classical fourth-order Runge–Kutta step.
pub fn rk4_step<E, F>(mut f: F, t: f64, y: &DVector<f64>, dt: f64) -> Result<DVector<f64>, E>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, E>,
{
    let k1 = f(t, y)?;
    rk4_step_from(f, t, y, &k1, dt)
}

/// As [`rk4_step`] with the first stage `k1 = f(t, y)` already known.
pub fn rk4_step_from<E, F>(mut f: F, t: f64, y: &DVector<f64>, k1: &DVector<f64>, dt: f64) -> Result<DVector<f64>, E>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, E>,
{
    let half = 0.5 * dt;
    let k2 = f(t + half, &(y + k1 * half))?;
    let k3 = f(t + half, &(y + &k2 * half))?;
    let k4 = f(t + dt, &(y + &k3 * dt))?;
    let mut out = y.clone();
    out.axpy(dt / 6.0, k1, 1.0);
    out.axpy(dt / 3.0, &k2, 1.0);
    out.axpy(dt / 3.0, &k3, 1.0);
    out.axpy(dt / 6.0, &k4, 1.0);
    Ok(out)
}
