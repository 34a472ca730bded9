fn main() -> anyhow::Result<()> {
    dsirp_cli::run()
}
