use std::io::{self, Write};

use oscctl_core::Trajectory;

pub const HEADER: &str = "t,E,Q,P,u,n,W,V1,speed";

/// Writes one row per sample with 17 significant digits; V1 is left empty
/// for laws without a Lyapunov function.
pub fn write_trajectory<W: Write>(out: &mut W, traj: &Trajectory) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for i in 0..traj.len() {
        let (s, c, m) = (&traj.states[i], &traj.controls[i], &traj.monitors[i]);
        let v1 = m.v1.map(|v| format!("{v:.16e}")).unwrap_or_default();
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{v1},{:.16e}",
            traj.times[i], s.energy, s.q, s.p, c.u, c.n, m.w, m.speed
        )?;
    }
    Ok(())
}

pub fn to_string(traj: &Trajectory) -> String {
    let mut buf = Vec::new();
    write_trajectory(&mut buf, traj).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}
