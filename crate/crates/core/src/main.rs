fn main() {
    let args: Vec<String> = std::env::args().collect();
    let (code, out) = frablocks::cli::run(&args);
    print!("{out}");
    std::process::exit(code);
}
