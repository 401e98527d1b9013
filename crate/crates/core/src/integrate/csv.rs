use std::fmt::Write as _;

use super::Trajectory;
use crate::geometry::StructureKind;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// Label written into a trailing `clock` column on every row.
    pub clock: Option<String>,
}

/// Float formatting shared by every numeric artifact: 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a trajectory as CSV with a trailing `# event:` record.
pub fn write_csv(traj: &Trajectory, options: &CsvOptions) -> String {
    let n = traj.initial().n();
    let mut out = String::new();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("q{i}")));
    header.extend((1..=n).map(|i| format!("p{i}")));
    if traj.initial().is_extended() {
        match traj.structure_kind() {
            StructureKind::ExtendedBS => header.extend(["s".into(), "E_s".into()]),
            _ => header.extend(["t_ext".into(), "E".into()]),
        }
    }
    if options.clock.is_some() {
        header.push("clock".into());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (t, state) in traj.times().iter().zip(traj.states()) {
        out.push_str(&format_float(*t));
        for v in state.coords() {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        if let Some(clock) = &options.clock {
            out.push(',');
            out.push_str(clock);
        }
        out.push('\n');
    }
    let event = traj.terminal_event();
    let _ = writeln!(
        out,
        "# event: {} at t={}",
        event.kind,
        format_float(event.time)
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PhaseState, PhaseStructure};
    use crate::hamiltonians::{HamiltonianSpec, Potential};
    use crate::integrate::{integrate, IntegratorConfig};

    #[test]
    fn layout_and_event_line() {
        let traj = integrate(
            &PhaseStructure::twisted(1, 1.0).unwrap(),
            &HamiltonianSpec::mechanical(1, Potential::Linear { lambda: 1.0 }).unwrap(),
            &PhaseState::planar(0.0, 1.0),
            &IntegratorConfig::rk4(0.1, 1.0),
        )
        .unwrap();
        let csv = write_csv(&traj, &CsvOptions::default());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,q1,p1");
        assert_eq!(
            lines[1],
            "0.0000000000000000e0,0.0000000000000000e0,1.0000000000000000e0"
        );
        assert_eq!(lines.len(), traj.len() + 2);
        assert!(lines
            .last()
            .unwrap()
            .starts_with("# event: t_max_reached at t=1.0"));
        let row: Vec<f64> = lines[5].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row[1], traj.states()[4].q()[0]);
    }

    #[test]
    fn extended_header_and_clock() {
        let structure = PhaseStructure::extended_canonical(1);
        let h = HamiltonianSpec::with_extension(
            1,
            Potential::Zero,
            crate::hamiltonians::Extension::Plain,
        )
        .unwrap();
        let init = PhaseState::extended(vec![0.0], vec![1.0], 0.0, 0.5).unwrap();
        let traj = integrate(&structure, &h, &init, &IntegratorConfig::rk4(0.5, 1.0)).unwrap();
        let csv = write_csv(
            &traj,
            &CsvOptions {
                clock: Some("real_t".into()),
            },
        );
        assert_eq!(csv.lines().next().unwrap(), "t,q1,p1,t_ext,E,clock");
        assert!(csv.lines().nth(1).unwrap().ends_with(",real_t"));
    }
}
