#include "support/support.hpp"

namespace fpt {

namespace {

// Test cases live at src/test/cases/<fully.qualified.Class>/<method>.sh; a
// case passes when it exits 0, and its output is echoed as the failure
// detail otherwise.
constexpr const char* kStubMaven = R"MVN(#!/bin/bash
echo "Apache Maven 3.5.2 (stub)"
echo "Java version: 1.8.0_151, vendor: Oracle Corporation"
echo "[INFO] Scanning for projects..."
echo "[INFO] ------------------------------------------------------------------------"
echo "[INFO] Building $(basename "$PWD") 1.0-SNAPSHOT"
echo "[INFO] ------------------------------------------------------------------------"
run_tests=0
for a in "$@"; do
  case "$a" in
    test|verify|install|package) run_tests=1 ;;
    -DskipTests|-DskipTests=true) skip=1 ;;
  esac
done
[ -n "$skip" ] && run_tests=0
total=0; failed=0
if [ $run_tests -eq 1 ] && [ -d src/test/cases ]; then
  echo "[INFO] --- maven-surefire-plugin:2.20.1:test (default-test) ---"
  echo "[INFO] -------------------------------------------------------"
  echo "[INFO]  T E S T S"
  echo "[INFO] -------------------------------------------------------"
  for cls_dir in $(ls -d src/test/cases/*/ | sort); do
    cls=$(basename "$cls_dir")
    echo "[INFO] Running $cls"
    n=0; f=0; report=""
    for t in $(ls "$cls_dir"*.sh | sort); do
      m=$(basename "$t" .sh)
      n=$((n + 1))
      out=$(bash "$t" 2>&1)
      if [ $? -ne 0 ]; then
        f=$((f + 1))
        report="$report[ERROR] $m($cls)  Time elapsed: 0.001 s  <<< FAILURE!
$out
"
      fi
    done
    total=$((total + n)); failed=$((failed + f))
    if [ $f -gt 0 ]; then
      echo "[ERROR] Tests run: $n, Failures: $f, Errors: 0, Skipped: 0, Time elapsed: 0.01 s <<< FAILURE! - in $cls"
      printf '%s' "$report"
    else
      echo "[INFO] Tests run: $n, Failures: 0, Errors: 0, Skipped: 0, Time elapsed: 0.01 s - in $cls"
    fi
  done
  echo "[INFO]"
  echo "[INFO] Results:"
  echo "[INFO]"
  if [ $failed -gt 0 ]; then
    echo "[ERROR] Tests run: $total, Failures: $failed, Errors: 0, Skipped: 0"
  else
    echo "[INFO] Tests run: $total, Failures: 0, Errors: 0, Skipped: 0"
  fi
fi
echo "[INFO] ------------------------------------------------------------------------"
if [ $failed -gt 0 ]; then
  echo "[INFO] BUILD FAILURE"
  echo "[INFO] ------------------------------------------------------------------------"
  exit 1
fi
echo "[INFO] BUILD SUCCESS"
echo "[INFO] ------------------------------------------------------------------------"
exit 0
)MVN";

constexpr const char* kStubPython = "#!/bin/bash\nexec python3 \"$@\"\n";

}  // namespace

void install_java_stub_image(failpass::LocalRuntime& runtime, const std::string& ref) {
  runtime.create_image(ref, {{"JAVA_HOME", "${ROOTFS}/usr/lib/jvm/java-8-oracle"}},
                       {{"usr/local/bin/mvn", kStubMaven},
                        {"usr/lib/jvm/java-8-oracle/release", "JAVA_VERSION=\"1.8.0_151\"\n"}});
}

void install_python_stub_image(failpass::LocalRuntime& runtime, const std::string& ref) {
  runtime.create_image(ref, {{"PYTHONDONTWRITEBYTECODE", "1"}},
                       {{"usr/local/bin/python", kStubPython}});
}

}  // namespace fpt
