public class ErrorCounters {
  public void clientErrorEncountered() {
    clientErrors.incr();
  }
  // consistent name: serverErrorEncountered
  public void serverErrorOccured() {
    serverErrors.incr();
  }
}
