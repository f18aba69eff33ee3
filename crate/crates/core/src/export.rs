//! Trace and comparison persistence: CSV files plus SVG plots.
//!
//! The trace CSV carries every recorded quantity except the two that are
//! pure functions of others: the task-space velocity (Jacobian times joint
//! velocity) and the joint torque (Jacobian transpose times the task-space
//! control). The reader rebuilds both through the same code paths, so a
//! round trip reproduces the records bit for bit.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use plotters::prelude::*;

use crate::dynamics::{self, RobotParams};
use crate::error::{Error, Result};
use crate::metrics::ComparisonMatrix;
use crate::sim::{SimulationTrace, TraceRecord};

const TRACE_HEADER_PREFIX: [&str; 22] = [
    "t", "q1", "q2", "qd1", "qd2", "x1", "x2", "xd1", "xd2", "xr1", "xr2", "z1_1", "z1_2",
    "z2_1", "z2_2", "u1", "u2", "fe1", "fe2", "b1", "b2", "V1",
];

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn trace_header(nodes: usize) -> Vec<String> {
    let mut header: Vec<String> = TRACE_HEADER_PREFIX.iter().map(|s| s.to_string()).collect();
    for axis in 1..=2 {
        for j in 1..=nodes {
            header.push(format!("w{axis}_{j}"));
        }
    }
    header
}

/// Writes the trace as CSV; 17 significant digits, so floats survive a round
/// trip exactly. An empty trace produces just the header.
pub fn write_trace_csv(path: &Path, trace: &SimulationTrace) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", trace_header(trace.node_count).join(","))?;
    for r in &trace.records {
        let mut fields = vec![
            r.t, r.q[0], r.q[1], r.qd[0], r.qd[1], r.x[0], r.x[1], r.xd[0], r.xd[1], r.xr[0],
            r.xr[1], r.z1[0], r.z1[1], r.z2[0], r.z2[1], r.u[0], r.u[1], r.fe[0], r.fe[1],
            r.bound[0], r.bound[1], r.v1,
        ];
        fields.extend(&r.weights[0]);
        fields.extend(&r.weights[1]);
        let line: Vec<String> = fields.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace CSV written by [`write_trace_csv`] back into records,
/// reconstructing the velocity and torque columns from the same kinematics
/// the simulator used.
pub fn read_trace_csv(path: &Path, robot: &RobotParams) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::MalformedTrace(format!("{}: {e}", path.display())))?;

    let headers = rdr
        .headers()
        .map_err(|e| Error::MalformedTrace(format!("unreadable header: {e}")))?
        .clone();
    if headers.len() < TRACE_HEADER_PREFIX.len()
        || headers.iter().take(TRACE_HEADER_PREFIX.len()).ne(TRACE_HEADER_PREFIX)
    {
        return Err(Error::MalformedTrace("unexpected trace column layout".into()));
    }
    let extra = headers.len() - TRACE_HEADER_PREFIX.len();
    if !extra.is_multiple_of(2) {
        return Err(Error::MalformedTrace("odd number of weight columns".into()));
    }
    let nodes = extra / 2;
    let expected = trace_header(nodes);
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::MalformedTrace("unexpected weight column names".into()));
    }

    let parse = |rec: &csv::StringRecord, i: usize| -> Result<f64> {
        rec[i]
            .parse::<f64>()
            .map_err(|e| Error::MalformedTrace(format!("field {i} = {:?}: {e}", &rec[i])))
    };

    let mut records = Vec::new();
    for row in rdr.records() {
        let rec = row.map_err(|e| Error::MalformedTrace(format!("bad row: {e}")))?;
        if rec.len() != expected.len() {
            return Err(Error::MalformedTrace(format!(
                "row has {} fields, expected {}",
                rec.len(),
                expected.len()
            )));
        }
        let v2 = |a: usize| -> Result<Vector2<f64>> {
            Ok(Vector2::new(parse(&rec, a)?, parse(&rec, a + 1)?))
        };
        let q = v2(1)?;
        let qd = v2(3)?;
        let u = v2(15)?;
        let jac = dynamics::jacobian(robot, &q);
        let mut weights = [Vec::with_capacity(nodes), Vec::with_capacity(nodes)];
        for (axis, w) in weights.iter_mut().enumerate() {
            for j in 0..nodes {
                w.push(parse(&rec, 22 + axis * nodes + j)?);
            }
        }
        records.push(TraceRecord {
            t: parse(&rec, 0)?,
            q,
            qd,
            x: v2(5)?,
            xd: v2(7)?,
            xr: v2(9)?,
            z1: v2(11)?,
            z2: v2(13)?,
            u,
            fe: v2(17)?,
            bound: v2(19)?,
            v1: parse(&rec, 21)?,
            xdot: jac * qd,
            tau_c: jac.transpose() * u,
            weights,
        });
    }
    Ok(records)
}

fn nonempty(trace: &SimulationTrace) -> Result<&[TraceRecord]> {
    if trace.records.is_empty() {
        return Err(Error::Plot("cannot plot an empty trace".into()));
    }
    Ok(&trace.records)
}

fn time_span(records: &[TraceRecord]) -> std::ops::Range<f64> {
    let t0 = records.first().map_or(0.0, |r| r.t);
    let t1 = records.last().map_or(0.0, |r| r.t).max(t0 + 1e-9);
    t0..t1
}

fn padded_range(lo: f64, hi: f64) -> std::ops::Range<f64> {
    let (mut lo, mut hi) = (lo, hi);
    if !(hi - lo).is_finite() || hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.08 * (hi - lo);
    (lo - pad)..(hi + pad)
}

/// Symmetric range covering the bulk of the data; extreme transients are
/// clamped into view instead of flattening the rest of the plot.
fn robust_symmetric_range(values: impl Iterator<Item = f64>) -> std::ops::Range<f64> {
    let mut v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return -1.0..1.0;
    }
    v.sort_by(f64::total_cmp);
    let pick = |frac: f64| v[((v.len() - 1) as f64 * frac).round() as usize].abs();
    let hi = pick(0.995).max(pick(0.005)).max(1e-9) * 1.25;
    -hi..hi
}

const SERIES_COLORS: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(99, 110, 250),
];

type Panel<'a> = DrawingArea<SVGBackend<'a>, plotters::coord::Shift>;
type Series = (String, RGBColor, Vec<(f64, f64)>);

fn line_chart(
    panel: &Panel<'_>,
    caption: &str,
    y_desc: &str,
    x_range: std::ops::Range<f64>,
    y_range: std::ops::Range<f64>,
    series: &[Series],
) -> Result<()> {
    let mut chart = ChartBuilder::on(panel)
        .margin(10)
        .x_label_area_size(28)
        .y_label_area_size(55)
        .caption(caption, ("sans-serif", 16))
        .build_cartesian_2d(x_range, y_range.clone())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("t [s]")
        .y_desc(y_desc)
        .draw()
        .map_err(plot_err)?;
    for (label, color, points) in series {
        let clamped: Vec<(f64, f64)> = points
            .iter()
            .map(|&(t, y)| (t, y.clamp(y_range.start, y_range.end)))
            .collect();
        let c = *color;
        chart
            .draw_series(LineSeries::new(clamped, c.stroke_width(1)))
            .map_err(plot_err)?
            .label(label.clone())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 16, y)], c.stroke_width(2))
            });
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.85))
        .draw()
        .map_err(plot_err)?;
    Ok(())
}

/// Per-axis position against its moving constraint, stacked vertically.
pub fn plot_trajectory(path: &Path, trace: &SimulationTrace) -> Result<()> {
    let records = nonempty(trace)?;
    let root = SVGBackend::new(path, (1000, 700)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let panels = root.split_evenly((2, 1));
    for (i, panel) in panels.iter().enumerate() {
        let bmax = records.iter().map(|r| r.bound[i]).fold(0.0, f64::max);
        let series = vec![
            (
                "+bound".to_string(),
                RGBColor(0, 0, 0),
                records.iter().map(|r| (r.t, r.bound[i])).collect(),
            ),
            (
                "-bound".to_string(),
                RGBColor(120, 120, 120),
                records.iter().map(|r| (r.t, -r.bound[i])).collect(),
            ),
            (
                "x".to_string(),
                SERIES_COLORS[0],
                records.iter().map(|r| (r.t, r.x[i])).collect(),
            ),
            (
                "xr".to_string(),
                SERIES_COLORS[1],
                records.iter().map(|r| (r.t, r.xr[i])).collect(),
            ),
            (
                "xd".to_string(),
                SERIES_COLORS[2],
                records.iter().map(|r| (r.t, r.xd[i])).collect(),
            ),
        ];
        line_chart(
            panel,
            &format!("axis {} position vs constraint", i + 1),
            "position [m]",
            time_span(records),
            padded_range(-bmax, bmax),
            &series,
        )?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Tracking error per axis.
pub fn plot_error(path: &Path, trace: &SimulationTrace) -> Result<()> {
    let records = nonempty(trace)?;
    let root = SVGBackend::new(path, (1000, 450)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let series: Vec<Series> = (0..2)
        .map(|i| {
            (
                format!("z1 axis {}", i + 1),
                SERIES_COLORS[i],
                records.iter().map(|r| (r.t, r.z1[i])).collect(),
            )
        })
        .collect();
    let lo = series
        .iter()
        .flat_map(|(_, _, pts)| pts.iter().map(|p| p.1))
        .fold(f64::INFINITY, f64::min);
    let hi = series
        .iter()
        .flat_map(|(_, _, pts)| pts.iter().map(|p| p.1))
        .fold(f64::NEG_INFINITY, f64::max);
    line_chart(
        &root,
        "position tracking error",
        "z1 [m]",
        time_span(records),
        padded_range(lo, hi),
        &series,
    )?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Task-space control force per axis; the y range covers the bulk of the
/// signal and clamps the startup spike into view.
pub fn plot_control(path: &Path, trace: &SimulationTrace) -> Result<()> {
    let records = nonempty(trace)?;
    let root = SVGBackend::new(path, (1000, 450)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let series: Vec<Series> = (0..2)
        .map(|i| {
            (
                format!("u axis {}", i + 1),
                SERIES_COLORS[i],
                records.iter().map(|r| (r.t, r.u[i])).collect(),
            )
        })
        .collect();
    let y_range = robust_symmetric_range(
        series.iter().flat_map(|(_, _, pts)| pts.iter().map(|p| p.1)),
    );
    line_chart(
        &root,
        "control force",
        "u [N]",
        time_span(records),
        y_range,
        &series,
    )?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Adaptive weight trajectories, one panel per axis.
pub fn plot_weights(path: &Path, trace: &SimulationTrace) -> Result<()> {
    let records = nonempty(trace)?;
    let root = SVGBackend::new(path, (1000, 700)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let panels = root.split_evenly((2, 1));
    for (axis, panel) in panels.iter().enumerate() {
        let nodes = records[0].weights[axis].len();
        let series: Vec<Series> = (0..nodes)
            .map(|j| {
                (
                    format!("w{}_{}", axis + 1, j + 1),
                    SERIES_COLORS[j % SERIES_COLORS.len()],
                    records.iter().map(|r| (r.t, r.weights[axis][j])).collect(),
                )
            })
            .collect();
        let lo = series
            .iter()
            .flat_map(|(_, _, pts)| pts.iter().map(|p| p.1))
            .fold(f64::INFINITY, f64::min);
        let hi = series
            .iter()
            .flat_map(|(_, _, pts)| pts.iter().map(|p| p.1))
            .fold(f64::NEG_INFINITY, f64::max);
        line_chart(
            panel,
            &format!("adaptive weights, axis {}", axis + 1),
            "w",
            time_span(records),
            padded_range(lo.min(0.0), hi.max(0.0)),
            &series,
        )?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Writes `{stem}.csv` plus the four standard plots into `dir`.
pub fn export_run(dir: &Path, trace: &SimulationTrace, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    write_trace_csv(&csv, trace)?;
    let trajectory = dir.join(format!("{stem}_trajectory.svg"));
    plot_trajectory(&trajectory, trace)?;
    let error = dir.join(format!("{stem}_error.svg"));
    plot_error(&error, trace)?;
    let control = dir.join(format!("{stem}_control.svg"));
    plot_control(&control, trace)?;
    let weights = dir.join(format!("{stem}_weights.svg"));
    plot_weights(&weights, trace)?;
    Ok(vec![csv, trajectory, error, control, weights])
}

/// Summary table, one row per compared controller.
pub fn write_matrix_csv(path: &Path, matrix: &ComparisonMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "variant,model_free,rmse1,rmse2,margin1,margin2,margin_t1,margin_t2,settling,tmax,peak_u,breaches"
    )?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6e}"));
    for r in &matrix.reports {
        writeln!(
            w,
            "{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{},{},{:.6e},{}",
            r.variant,
            r.model_free,
            r.rmse[0],
            r.rmse[1],
            r.margin[0],
            r.margin[1],
            r.margin_at[0],
            r.margin_at[1],
            opt(r.settling),
            opt(r.tmax),
            r.peak_control,
            r.breaches,
        )?;
    }
    w.flush()?;
    Ok(())
}

fn row_stem(variant: crate::control::ControllerVariant, model_free: bool) -> String {
    format!("{variant}_{}", if model_free { "nn" } else { "mb" })
}

/// Writes the comparison table plus the four plots for every row:
/// 1 + 4 * rows files in `dir`.
pub fn export_comparison(dir: &Path, matrix: &ComparisonMatrix) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let table = dir.join("comparison.csv");
    write_matrix_csv(&table, matrix)?;
    let mut written = vec![table];
    for trace in &matrix.traces {
        let stem = row_stem(trace.variant, trace.model_free);
        let path = dir.join(format!("{stem}_trajectory.svg"));
        plot_trajectory(&path, trace)?;
        written.push(path);
        let path = dir.join(format!("{stem}_error.svg"));
        plot_error(&path, trace)?;
        written.push(path);
        let path = dir.join(format!("{stem}_control.svg"));
        plot_control(&path, trace)?;
        written.push(path);
        let path = dir.join(format!("{stem}_weights.svg"));
        plot_weights(&path, trace)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControllerVariant;
    use crate::metrics::MetricsReport;

    /// Small trace whose velocity and torque columns honor the kinematic
    /// reconstruction invariant used by the reader.
    fn fixture_trace(n: usize) -> (RobotParams, SimulationTrace) {
        let robot = RobotParams::default();
        let records = (0..n)
            .map(|k| {
                let t = k as f64 * 0.01;
                let q = Vector2::new(0.5 + 0.3 * t.sin(), 2.0 + 0.2 * t.cos());
                let qd = Vector2::new(0.3 * t.cos(), -0.2 * t.sin());
                let u = Vector2::new((1.7 * t).sin() * 3.0, (0.9 * t).cos() * 2.0);
                let jac = dynamics::jacobian(&robot, &q);
                TraceRecord {
                    t,
                    q,
                    qd,
                    x: dynamics::forward_kinematics(&robot, &q),
                    xdot: jac * qd,
                    xd: Vector2::new(t.cos() * 0.18, t.sin() * 0.18),
                    xr: Vector2::new(t.cos() * 0.17, t.sin() * 0.17),
                    z1: Vector2::new(1e-3 * t, -2e-3 * t),
                    z2: Vector2::new(-3e-3 * t, 4e-3 * t),
                    u,
                    tau_c: jac.transpose() * u,
                    fe: Vector2::new(0.0, if t > 0.05 { 2.0 } else { 0.0 }),
                    bound: Vector2::new(0.53, 0.48),
                    v1: 1e-4 * t,
                    weights: [
                        (0..4).map(|j| 0.01 * j as f64 + t).collect(),
                        (0..4).map(|j| -0.02 * j as f64 - t).collect(),
                    ],
                }
            })
            .collect();
        let trace = SimulationTrace {
            variant: ControllerVariant::FxtTviblf,
            model_free: true,
            dt: 0.01,
            node_count: 4,
            breach_steps: 0,
            config_fingerprint: 42,
            records,
        };
        (robot, trace)
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let (robot, trace) = fixture_trace(25);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(&path, &trace).unwrap();
        let back = read_trace_csv(&path, &robot).unwrap();
        assert_eq!(back, trace.records);
    }

    #[test]
    fn empty_trace_writes_just_the_header() {
        let (robot, mut trace) = fixture_trace(0);
        trace.node_count = 4;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_trace_csv(&path, &trace).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("t,q1,q2,"));
        assert!(header.ends_with("w1_1,w1_2,w1_3,w1_4,w2_1,w2_2,w2_3,w2_4"));
        assert_eq!(lines.next(), None);
        assert_eq!(read_trace_csv(&path, &robot).unwrap(), vec![]);
    }

    #[test]
    fn reader_rejects_mangled_files() {
        let (robot, trace) = fixture_trace(3);
        let dir = tempfile::tempdir().unwrap();

        let path = dir.path().join("bad_header.csv");
        let mut text = std::fs::read_to_string({
            let p = dir.path().join("ok.csv");
            write_trace_csv(&p, &trace).unwrap();
            p
        })
        .unwrap();
        text = text.replacen("z1_1", "zz_1", 1);
        std::fs::write(&path, &text).unwrap();
        assert!(matches!(
            read_trace_csv(&path, &robot),
            Err(Error::MalformedTrace(_))
        ));

        let path = dir.path().join("bad_field.csv");
        let good = std::fs::read_to_string(dir.path().join("ok.csv")).unwrap();
        std::fs::write(&path, good.replacen("e0,", "oops,", 1)).unwrap();
        assert!(matches!(
            read_trace_csv(&path, &robot),
            Err(Error::MalformedTrace(_))
        ));
    }

    #[test]
    fn plots_refuse_an_empty_trace() {
        let (_, trace) = fixture_trace(0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.svg");
        for f in [plot_trajectory, plot_error, plot_control, plot_weights] {
            assert!(matches!(f(&path, &trace), Err(Error::Plot(_))));
        }
    }

    #[test]
    fn export_run_produces_the_standard_file_set() {
        let (_, trace) = fixture_trace(30);
        let dir = tempfile::tempdir().unwrap();
        let files = export_run(dir.path(), &trace, "demo").unwrap();
        assert_eq!(files.len(), 5);
        for f in &files {
            assert!(f.exists(), "{} missing", f.display());
            assert!(std::fs::metadata(f).unwrap().len() > 0);
        }
        let names: Vec<_> = files
            .iter()
            .map(|f| f.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            [
                "demo.csv",
                "demo_trajectory.svg",
                "demo_error.svg",
                "demo_control.svg",
                "demo_weights.svg"
            ]
        );
    }

    #[test]
    fn export_comparison_writes_table_plus_plots_per_row() {
        let (_, t1) = fixture_trace(10);
        let mut t2 = fixture_trace(10).1;
        t2.variant = ControllerVariant::Tviblf;
        t2.model_free = false;
        let report = |trace: &SimulationTrace| MetricsReport {
            variant: trace.variant,
            model_free: trace.model_free,
            rmse: Vector2::new(1e-3, 2e-3),
            margin: Vector2::new(0.1, 0.2),
            margin_at: Vector2::new(5.0, 6.0),
            settling: Some(0.5),
            tmax: None,
            peak_control: 10.0,
            breaches: 0,
        };
        let matrix = ComparisonMatrix {
            reports: vec![report(&t1), report(&t2)],
            traces: vec![t1, t2],
            fingerprint: 7,
            mass_sup: 10.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let files = export_comparison(dir.path(), &matrix).unwrap();
        assert_eq!(files.len(), 1 + 4 * 2);
        for f in &files {
            assert!(f.exists());
        }
        let table = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
        assert_eq!(table.lines().count(), 3);
        assert!(table.lines().nth(1).unwrap().starts_with("fxt-tviblf,true,"));
        // Settling present, analytic bound absent: adjacent commas.
        assert!(table.contains(",5.000000e-1,,"));
    }
}
